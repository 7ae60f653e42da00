//! Token vocabulary shared by every corpus.
//!
//! Id layout, ascending: special tokens, entities (first-seen order),
//! relations (first-seen order), then adjacency count values `0..=ceiling`.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{EntityId, RelationId};

pub type TokenId = u32;

pub const DEFAULT_VALUE_CEILING: u32 = 64;

const HEADER_TAG: &str = "#kgpretrain-vocab";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u32)]
pub enum Special {
    Pad = 0,
    Mask,
    NoPath,
    Sep,
    Eos,
    Sp,
    Ip,
    Khn,
    Iva,
    Lcc,
}

impl Special {
    pub const ALL: [Special; 10] = [
        Special::Pad,
        Special::Mask,
        Special::NoPath,
        Special::Sep,
        Special::Eos,
        Special::Sp,
        Special::Ip,
        Special::Khn,
        Special::Iva,
        Special::Lcc,
    ];

    pub fn token(self) -> TokenId {
        self as TokenId
    }

    pub fn surface(self) -> &'static str {
        match self {
            Special::Pad => "[PAD]",
            Special::Mask => "[MASK]",
            Special::NoPath => "[NO_PATH]",
            Special::Sep => "[SEP]",
            Special::Eos => "[EOS]",
            Special::Sp => "[SP]",
            Special::Ip => "[IP]",
            Special::Khn => "[KHN]",
            Special::Iva => "[IVA]",
            Special::Lcc => "[LCC]",
        }
    }
}

pub const NUM_SPECIALS: u32 = Special::ALL.len() as u32;

/// What a token id decodes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Token {
    Special(Special),
    Entity(EntityId),
    Relation(RelationId),
    Value(u32),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    entities: Vec<String>,
    relations: Vec<String>,
    entity_index: HashMap<String, EntityId>,
    relation_index: HashMap<String, RelationId>,
    value_ceiling: u32,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::with_value_ceiling(DEFAULT_VALUE_CEILING)
    }

    pub fn with_value_ceiling(value_ceiling: u32) -> Self {
        Vocabulary {
            entities: Vec::new(),
            relations: Vec::new(),
            entity_index: HashMap::new(),
            relation_index: HashMap::new(),
            value_ceiling,
        }
    }

    pub fn intern_entity(&mut self, surface: &str) -> EntityId {
        if let Some(&id) = self.entity_index.get(surface) {
            return id;
        }
        let id = EntityId(self.entities.len() as u32);
        self.entities.push(surface.to_owned());
        self.entity_index.insert(surface.to_owned(), id);
        id
    }

    pub fn intern_relation(&mut self, surface: &str) -> RelationId {
        if let Some(&id) = self.relation_index.get(surface) {
            return id;
        }
        let id = RelationId(self.relations.len() as u32);
        self.relations.push(surface.to_owned());
        self.relation_index.insert(surface.to_owned(), id);
        id
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn value_ceiling(&self) -> u32 {
        self.value_ceiling
    }

    pub fn entity(&self, surface: &str) -> Option<EntityId> {
        self.entity_index.get(surface).copied()
    }

    pub fn relation(&self, surface: &str) -> Option<RelationId> {
        self.relation_index.get(surface).copied()
    }

    pub fn entity_surface(&self, e: EntityId) -> Option<&str> {
        self.entities.get(e.index()).map(String::as_str)
    }

    pub fn relation_surface(&self, r: RelationId) -> Option<&str> {
        self.relations.get(r.index()).map(String::as_str)
    }

    pub fn entity_token(&self, e: EntityId) -> TokenId {
        NUM_SPECIALS + e.0
    }

    pub fn relation_token(&self, r: RelationId) -> TokenId {
        NUM_SPECIALS + self.entities.len() as u32 + r.0
    }

    fn value_base(&self) -> TokenId {
        NUM_SPECIALS + (self.entities.len() + self.relations.len()) as u32
    }

    /// Token for an adjacency count. Counts above the ceiling are clamped;
    /// the flag reports whether that happened.
    pub fn value_token(&self, value: u32) -> (TokenId, bool) {
        let clamped = value > self.value_ceiling;
        (self.value_base() + value.min(self.value_ceiling), clamped)
    }

    pub fn len(&self) -> usize {
        self.value_base() as usize + self.value_ceiling as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn decode(&self, token: TokenId) -> Option<Token> {
        let ne = self.entities.len() as u32;
        let nr = self.relations.len() as u32;
        if token < NUM_SPECIALS {
            return Some(Token::Special(Special::ALL[token as usize]));
        }
        let t = token - NUM_SPECIALS;
        if t < ne {
            return Some(Token::Entity(EntityId(t)));
        }
        let t = t - ne;
        if t < nr {
            return Some(Token::Relation(RelationId(t)));
        }
        let v = t - nr;
        (v <= self.value_ceiling).then_some(Token::Value(v))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "{HEADER_TAG}\tentities={}\trelations={}\tvalue_ceiling={}",
            self.entities.len(),
            self.relations.len(),
            self.value_ceiling
        )?;
        for s in Special::ALL {
            writeln!(w, "{}\t{}", s.surface(), s.token())?;
        }
        for (i, s) in self.entities.iter().enumerate() {
            writeln!(w, "{}\t{}", s, self.entity_token(EntityId(i as u32)))?;
        }
        for (i, s) in self.relations.iter().enumerate() {
            writeln!(w, "{}\t{}", s, self.relation_token(RelationId(i as u32)))?;
        }
        for v in 0..=self.value_ceiling {
            writeln!(w, "[V{v}]\t{}", self.value_token(v).0)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    /// Hex SHA-256 of the serialized form.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }

    pub fn read_from<R: BufRead>(reader: R, path: &std::path::Path) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let header = match lines.next() {
            Some((_, line)) => line.map_err(|e| Error::io(path, e))?,
            None => return Err(Error::parse(path, 1, "missing vocabulary header")),
        };
        let (ne, nr, ceiling) = parse_header(&header).ok_or_else(|| Error::parse(path, 1, "malformed vocabulary header"))?;

        let mut vocab = Vocabulary::with_value_ceiling(ceiling);
        let expected = NUM_SPECIALS as usize + ne + nr + ceiling as usize + 1;
        let mut seen = 0usize;
        for (idx, line) in lines {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            let (surface, id) = line
                .rsplit_once('\t')
                .ok_or_else(|| Error::parse(path, lineno, "expected token<TAB>id"))?;
            let id: u32 = id
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad token id {id:?}")))?;
            if id as usize != seen {
                return Err(Error::parse(path, lineno, format!("expected id {seen}, found {id}")));
            }
            let slot = seen;
            seen += 1;
            if slot < NUM_SPECIALS as usize {
                let special = Special::ALL[slot];
                if surface != special.surface() {
                    return Err(Error::parse(path, lineno, format!("expected special token {}", special.surface())));
                }
            } else if slot < NUM_SPECIALS as usize + ne {
                if vocab.entity_index.contains_key(surface) {
                    return Err(Error::parse(path, lineno, format!("duplicate entity {surface:?}")));
                }
                vocab.intern_entity(surface);
            } else if slot < NUM_SPECIALS as usize + ne + nr {
                if vocab.relation_index.contains_key(surface) {
                    return Err(Error::parse(path, lineno, format!("duplicate relation {surface:?}")));
                }
                vocab.intern_relation(surface);
            } else if slot >= expected {
                return Err(Error::parse(path, lineno, "more tokens than the header declares"));
            }
        }
        if seen != expected {
            return Err(Error::parse(
                path,
                seen + 1,
                format!("header declares {expected} tokens, found {seen}"),
            ));
        }
        Ok(vocab)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(f), path)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

fn parse_header(line: &str) -> Option<(usize, usize, u32)> {
    let mut fields = line.split('\t');
    if fields.next()? != HEADER_TAG {
        return None;
    }
    let mut get = |key: &str| -> Option<&str> { fields.next()?.strip_prefix(key)?.strip_prefix('=') };
    let ne = get("entities")?.parse().ok()?;
    let nr = get("relations")?.parse().ok()?;
    let ceiling = get("value_ceiling")?.parse().ok()?;
    Some((ne, nr, ceiling))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::path::Path;

    #[test]
    fn empty_vocab_has_only_specials_and_values() {
        let v = Vocabulary::new();
        assert_eq!(v.num_entities(), 0);
        assert_eq!(v.len(), NUM_SPECIALS as usize + 65);
        assert_eq!(v.decode(0), Some(Token::Special(Special::Pad)));
        assert_eq!(v.decode(NUM_SPECIALS), Some(Token::Value(0)));
    }

    #[test]
    fn layout_and_decode() {
        let mut v = Vocabulary::new();
        let a = v.intern_entity("A");
        let b = v.intern_entity("B");
        assert_eq!(v.intern_entity("A"), a);
        let r = v.intern_relation("likes");
        assert_eq!(v.entity_token(b), NUM_SPECIALS + 1);
        assert_eq!(v.relation_token(r), NUM_SPECIALS + 2);
        assert_eq!(v.decode(v.relation_token(r)), Some(Token::Relation(r)));
        assert_eq!(v.value_token(3), (NUM_SPECIALS + 3 + 3, false));
        assert_eq!(v.value_token(100), (NUM_SPECIALS + 3 + 64, true));
        assert_eq!(v.decode(v.len() as u32), None);
    }

    #[test]
    fn entity_and_relation_namespaces_are_separate() {
        let mut v = Vocabulary::new();
        v.intern_entity("x");
        v.intern_relation("x");
        let back = Vocabulary::read_from(&v.to_bytes()[..], Path::new("mem")).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn rejects_gaps_in_ids() {
        let text = "#kgpretrain-vocab\tentities=0\trelations=0\tvalue_ceiling=0\n[PAD]\t1\n";
        let err = Vocabulary::read_from(text.as_bytes(), Path::new("v.tsv")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    proptest! {
        #[test]
        fn persisted_form_round_trips(
            ents in proptest::collection::vec("[a-zA-Z0-9/_. ]{1,12}", 0..20),
            rels in proptest::collection::vec("[a-z_/]{1,8}", 0..6),
        ) {
            let mut v = Vocabulary::new();
            for e in &ents { v.intern_entity(e); }
            for r in &rels { v.intern_relation(r); }
            let bytes = v.to_bytes();
            let back = Vocabulary::read_from(&bytes[..], Path::new("mem")).unwrap();
            prop_assert_eq!(&back, &v);
            prop_assert_eq!(back.to_bytes(), bytes);
        }
    }
}
