//! `kgpretrain` command line: ingest, generate, mix, stats, verify.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 invariant violation.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;

use crate::corpus::{
    build_queries, generate_task_records, mix_multitask, read_corpus, verify_corpus, write_corpus, Corpus,
    CorpusHeader, GenerationConfig, TaskKind, FORMAT_NAME, FORMAT_VERSION,
};
use crate::error::{Error, Result};
use crate::graph::Split;
use crate::ingest::{write_normalized, Dataset, DatasetKind, DatasetPaths, DatasetStats};
use crate::neighborhood::DegreeMode;
use crate::vocab::Vocabulary;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

pub const VOCAB_FILE: &str = "vocab.tsv";
pub const MIXED_FILE: &str = "all.jsonl";
pub const MIX_PLAN_FILE: &str = "mix_plan.json";

#[derive(Debug, Parser)]
#[command(name = "kgpretrain", version, about = "Graph-structural pretraining corpora for knowledge (hyper)graphs")]
struct Cli {
    /// Worker threads; defaults to the available parallelism. Output bytes do
    /// not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a dataset and write the vocabulary plus id-normalized splits.
    Ingest {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, env = "KGPRETRAIN_OUT", default_value = "out")]
        out: PathBuf,
    },
    /// Generate per-task corpora (`sp`, `ip`, `khn`, `iva`, `lcc` or `all`).
    Generate {
        #[arg(required = true, num_args = 1..)]
        tasks: Vec<String>,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        params: GenParams,
        #[arg(long, env = "KGPRETRAIN_OUT", default_value = "out")]
        out: PathBuf,
    },
    /// Mix the per-task corpora of a directory into the multitask corpus.
    Mix {
        #[arg(long, env = "KGPRETRAIN_OUT", default_value = "out")]
        corpus_dir: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Defaults to `<corpus-dir>/all.jsonl`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print dataset statistics and, optionally, per-task record counts.
    Stats {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        corpus_dir: Option<PathBuf>,
    },
    /// Re-check every corpus invariant over a corpus file or directory.
    Verify {
        path: PathBuf,
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Directory holding train.txt and optionally valid.txt / test.txt.
    #[arg(long, conflicts_with = "train")]
    dataset: Option<PathBuf>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long, requires = "train")]
    valid: Option<PathBuf>,
    #[arg(long, requires = "train")]
    test: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "triples")]
    kind: DatasetKind,
}

impl DataArgs {
    fn paths(&self) -> Result<DatasetPaths> {
        match (&self.dataset, &self.train) {
            (Some(dir), _) => DatasetPaths::from_dir(dir),
            (None, Some(train)) => Ok(DatasetPaths {
                train: train.clone(),
                valid: self.valid.clone(),
                test: self.test.clone(),
            }),
            (None, None) => Err(Error::InvalidArgument("pass --dataset DIR or --train FILE".into())),
        }
    }

    fn load(&self) -> Result<Dataset> {
        let paths = self.paths()?;
        info!("ingesting {}", paths.train.display());
        Dataset::load(&paths, self.kind)
    }
}

#[derive(Debug, Args)]
struct GenParams {
    #[arg(long)]
    seed: u64,
    /// TOML file with generation parameters; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Neighborhood radius for KHN and LCC.
    #[arg(long)]
    hops: Option<usize>,
    /// Maximum relational path length.
    #[arg(long)]
    max_hops: Option<usize>,
    /// Beam width of the information-gain path search.
    #[arg(long)]
    beam: Option<usize>,
    #[arg(long)]
    sp_cap: Option<usize>,
    #[arg(long)]
    iva_hops: Option<usize>,
    #[arg(long)]
    iva_cap: Option<usize>,
    #[arg(long)]
    corruption_rate: Option<f64>,
    #[arg(long)]
    max_input_len: Option<usize>,
    #[arg(long, value_enum)]
    khn_degree: Option<DegreeMode>,
    #[arg(long, value_enum)]
    lcc_degree: Option<DegreeMode>,
}

impl GenParams {
    /// flags > config file > defaults
    fn resolve(&self) -> Result<GenerationConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                toml::from_str::<GenerationConfig>(&text).map_err(|e| Error::parse(p, 0, e.to_string()))?
            }
            None => GenerationConfig::default(),
        };
        cfg.seed = self.seed;
        macro_rules! over {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { cfg.$f = v; })* };
        }
        over!(hops, max_hops, beam, sp_cap, iva_hops, iva_cap, corruption_rate, max_input_len, khn_degree, lcc_degree);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidArgument(_) => EXIT_USAGE,
        Error::Invariant(_) => EXIT_INVARIANT,
        _ => EXIT_DATA,
    }
}

/// Parses `argv` (program name first), runs the command, returns the exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.workers.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_USAGE;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Ingest { data, out } => ingest(&data, &out).map(|_| EXIT_OK),
        Command::Generate {
            tasks,
            data,
            params,
            out,
        } => generate(&tasks, &data, &params, &out).map(|_| EXIT_OK),
        Command::Mix { corpus_dir, seed, out } => mix(&corpus_dir, seed, out.as_deref()).map(|_| EXIT_OK),
        Command::Stats { data, corpus_dir } => stats(&data, corpus_dir.as_deref()).map(|_| EXIT_OK),
        Command::Verify { path, vocab } => verify(&path, vocab.as_deref()),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn ingest(data: &DataArgs, out: &Path) -> Result<()> {
    let ds = data.load()?;
    create_dir(out)?;
    ds.vocab.save(&out.join(VOCAB_FILE))?;
    for (name, tuples) in [("train", &ds.train), ("valid", &ds.valid), ("test", &ds.test)] {
        let mut buf = Vec::new();
        write_normalized(tuples, &mut buf).expect("writing to a Vec cannot fail");
        write_file(&out.join(format!("{name}.ids")), &buf)?;
    }
    let stats = ds.stats();
    write_file(&out.join("stats.json"), &to_json(&stats))?;
    info!(
        "ingested {} entities, {} relations, {} / {} / {} tuples",
        stats.entities, stats.relations, stats.train, stats.valid, stats.test
    );
    Ok(())
}

fn parse_tasks(names: &[String]) -> Result<Vec<TaskKind>> {
    let mut tasks = Vec::new();
    for n in names {
        if n.eq_ignore_ascii_case("all") {
            tasks.extend(TaskKind::ALL);
        } else {
            tasks.push(TaskKind::parse(n).ok_or_else(|| Error::InvalidArgument(format!("unknown task {n:?}")))?);
        }
    }
    tasks.sort_unstable();
    tasks.dedup();
    Ok(tasks)
}

fn single_task_header(
    cfg: &GenerationConfig,
    vocab: &Vocabulary,
    task: TaskKind,
    count: usize,
    skipped: u64,
) -> CorpusHeader {
    let alpha = if count > 0 { BTreeMap::from([(task, 1.0)]) } else { BTreeMap::new() };
    CorpusHeader {
        format: FORMAT_NAME.to_owned(),
        version: FORMAT_VERSION,
        seed: cfg.seed,
        config_hash: cfg.digest(),
        vocab_hash: vocab.digest(),
        config: cfg.clone(),
        counts: BTreeMap::from([(task, count)]),
        alpha,
        skipped: BTreeMap::from([(task, skipped)]),
        uniform_weighting: false,
    }
}

fn generate(task_names: &[String], data: &DataArgs, params: &GenParams, out: &Path) -> Result<()> {
    let tasks = parse_tasks(task_names)?;
    let cfg = params.resolve()?;
    let ds = data.load()?;
    let g = ds.train_graph()?;
    create_dir(out)?;
    ds.vocab.save(&out.join(VOCAB_FILE))?;
    let queries = build_queries(&ds.train, Split::Train);
    for task in tasks {
        let output = generate_task_records(&g, &ds.vocab, task, &queries, &cfg)?;
        if output.records.is_empty() {
            warn!("{}: no records generated", task.name());
        }
        if output.skipped > 0 {
            warn!("{}: skipped {} queries or centers without a record", task.name(), output.skipped);
        }
        let header = single_task_header(&cfg, &ds.vocab, task, output.records.len(), output.skipped);
        let path = out.join(task.file_name());
        write_corpus(&path, &header, &output.records)?;
        info!("{}: wrote {} records to {}", task.name(), output.records.len(), path.display());
    }
    Ok(())
}

fn task_corpora(dir: &Path) -> Result<Vec<(TaskKind, Corpus)>> {
    let mut out = Vec::new();
    for task in TaskKind::ALL {
        let path = dir.join(task.file_name());
        if path.is_file() {
            out.push((task, read_corpus(&path)?));
        }
    }
    Ok(out)
}

fn mix(dir: &Path, seed: u64, out: Option<&Path>) -> Result<()> {
    let corpora = task_corpora(dir)?;
    let Some((_, first)) = corpora.first() else {
        return Err(Error::EmptyCorpus);
    };
    let base = first.header.clone();
    let mut skipped = BTreeMap::new();
    let mut per_task = Vec::new();
    for (task, corpus) in corpora {
        if corpus.header.config_hash != base.config_hash || corpus.header.vocab_hash != base.vocab_hash {
            return Err(Error::InvalidArgument(format!(
                "{} was generated with a different config or vocabulary",
                task.file_name()
            )));
        }
        if let Some(&s) = corpus.header.skipped.get(&task) {
            skipped.insert(task, s);
        }
        if let Some(bad) = corpus.records.iter().find(|r| r.task != task) {
            return Err(Error::Invariant(format!("{} holds a {:?} record", task.file_name(), bad.task)));
        }
        per_task.push((task, corpus.records));
    }
    let (stream, plan) = mix_multitask(per_task, seed)?;
    if (plan.weight_sum() - 1.0).abs() > 1e-12 {
        return Err(Error::Invariant(format!("mix weights sum to {}", plan.weight_sum())));
    }
    let header = CorpusHeader {
        seed,
        counts: plan.sizes.clone(),
        alpha: plan.weights.clone(),
        skipped,
        ..base
    };
    let target = out.map(Path::to_path_buf).unwrap_or_else(|| dir.join(MIXED_FILE));
    write_corpus(&target, &header, &stream)?;
    let plan_path = target.with_file_name(MIX_PLAN_FILE);
    write_file(&plan_path, &to_json(&plan))?;
    info!("mixed {} records into {}", stream.len(), target.display());
    Ok(())
}

#[derive(Serialize)]
struct StatsReport {
    dataset: DatasetStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    corpus: Option<BTreeMap<TaskKind, usize>>,
}

fn stats(data: &DataArgs, corpus_dir: Option<&Path>) -> Result<()> {
    let ds = data.load()?;
    let corpus = match corpus_dir {
        Some(dir) => Some(
            task_corpora(dir)?
                .into_iter()
                .map(|(t, c)| (t, c.records.len()))
                .collect(),
        ),
        None => None,
    };
    let report = StatsReport {
        dataset: ds.stats(),
        corpus,
    };
    let mut stdout = std::io::stdout().lock();
    stdout
        .write_all(&to_json(&report))
        .map_err(|e| Error::io("<stdout>", e))?;
    Ok(())
}

fn verify(path: &Path, vocab: Option<&Path>) -> Result<i32> {
    let files: Vec<PathBuf> = if path.is_dir() {
        let mut v: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        v.sort();
        v
    } else {
        vec![path.to_path_buf()]
    };
    let vocab_path = vocab.map(Path::to_path_buf).or_else(|| {
        let dir = if path.is_dir() { path } else { path.parent()? };
        let p = dir.join(VOCAB_FILE);
        p.is_file().then_some(p)
    });
    let vocab = vocab_path.as_deref().map(Vocabulary::load).transpose()?;
    let mut failures = 0usize;
    for f in &files {
        let corpus = read_corpus(f)?;
        let problems = verify_corpus(&corpus, vocab.as_ref());
        for p in problems.iter().take(20) {
            eprintln!("{}: {p}", f.display());
        }
        if problems.is_empty() {
            info!("{}: {} records ok", f.display(), corpus.records.len());
        } else {
            failures += 1;
            warn!("{}: {} violations", f.display(), problems.len());
        }
    }
    if files.is_empty() {
        warn!("no corpus files under {}", path.display());
    }
    Ok(if failures == 0 { EXIT_OK } else { EXIT_INVARIANT })
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("report serializes");
    v.push(b'\n');
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_names() {
        assert_eq!(parse_tasks(&["all".into()]).unwrap(), TaskKind::ALL.to_vec());
        assert_eq!(parse_tasks(&["IVA".into(), "sp".into()]).unwrap(), vec![TaskKind::Sp, TaskKind::Iva]);
        assert!(parse_tasks(&["nope".into()]).is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_command(["kgpretrain", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run_command(["kgpretrain", "generate", "sp"]), EXIT_USAGE);
        assert_eq!(run_command(["kgpretrain", "--help"]), EXIT_OK);
    }

    #[test]
    fn config_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("cfg.toml");
        std::fs::write(&file, "beam = 2\nhops = 2\n").unwrap();
        let params = GenParams {
            seed: 9,
            config: Some(file),
            hops: Some(1),
            max_hops: None,
            beam: None,
            sp_cap: None,
            iva_hops: None,
            iva_cap: None,
            corruption_rate: None,
            max_input_len: None,
            khn_degree: None,
            lcc_degree: None,
        };
        let cfg = params.resolve().unwrap();
        assert_eq!((cfg.beam, cfg.hops, cfg.max_hops, cfg.seed), (2, 1, 4, 9));
    }
}
