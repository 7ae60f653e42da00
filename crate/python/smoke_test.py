"""Builds the extension module, imports it and exercises each binding.

    python3 python/smoke_test.py [--release]
"""
import json
import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def build(release):
    cmd = ["cargo", "build", "-p", "kgpretrain-py"] + (["--release"] if release else [])
    subprocess.run(cmd, cwd=ROOT, check=True)
    lib = ROOT / "target" / ("release" if release else "debug")
    for name in ("libkgpretrain_py.so", "libkgpretrain_py.dylib", "kgpretrain_py.dll"):
        if (lib / name).exists():
            return lib / name
    sys.exit("extension library not found under " + str(lib))


def main():
    built = build("--release" in sys.argv)
    moddir = Path(tempfile.mkdtemp())
    suffix = ".pyd" if built.suffix == ".dll" else ".so"
    shutil.copy(built, moddir / ("kgpretrain_py" + suffix))
    sys.path.insert(0, str(moddir))
    import kgpretrain_py as kp

    # triangle 0-1-2 plus a pendant 3
    g = kp.Graph(4, 2, [(0, [0, 1]), (0, [1, 2]), (1, [0, 2]), (1, [2, 3])])
    assert (g.num_entities, g.num_relations, g.num_tuples) == (4, 2, 4)
    assert g.neighbors(2) == [0, 1, 3]
    assert g.entities_of_relation(1) == [0, 2, 3]
    assert g.incident_relations(0) == [1]
    assert abs(g.relation_entropy(0) - math.log(4) + 0.75 * math.log(3)) < 1e-12
    assert g.shortest_paths(0, 3) == []  # only r1, r1, which repeats
    assert g.shortest_paths(1, 3) == [[0, 1]]
    assert g.ground_paths(1, 3, [[0, 1], [1]]) == [[0, 1]]
    assert g.information_gain_paths(0, beam=1, max_hops=2) == [[1], [1, 0]]
    assert g.khop(3, 2) == [0, 1, 2]
    assert g.lcc(0) == 1.0
    occ = g.occurrence(0, 1)
    assert abs(sum(p for _, p in occ) - 1.0) < 1e-12
    assert g.adjacency([0, 1, 2]) == [[0, 1, 1], [1, 0, 1], [1, 1, 0]]

    pos = g.iva_example(2, seed=1, negative=False)
    neg = g.iva_example(2, seed=1, negative=True)
    assert pos["label"] == 1 and neg["label"] == 0
    assert sorted(pos["left_entities"]) == sorted(pos["right_entities"])

    assert kp.flatten_adjacency([1, 2, 3], [[1, 2, 1], [2, 0, 3], [1, 3, 1]]) == ([1, 2, 3], [1, 2, 1, 0, 3, 1])

    try:
        g.neighbors(99)
    except ValueError:
        pass
    else:
        raise AssertionError("out-of-range entity accepted")

    with tempfile.TemporaryDirectory() as tmp:
        data = Path(tmp) / "kg"
        data.mkdir()
        (data / "train.txt").write_text("a\tr\tb\nb\tr\tc\nc\ts\ta\nc\ts\td\n")
        (data / "test.txt").write_text("a\ts\td\n")
        ds = kp.Dataset.load(str(data))
        assert ds.stats()["entities"] == 4 and ds.stats()["test"] == 1
        assert ds.entity_id("c") == 2 and ds.relation_id("s") == 1
        assert ds.graph().num_tuples == 4
        lines = ds.generate("khn", seed=0, hops=2)
        records = [json.loads(x) for x in lines]
        assert records and all(r["task"] == "KHN" for r in records)
        assert max(r["provenance"]["sub"] for r in records) == 2

        out = Path(tmp) / "corpus"
        assert kp.run_cli(["generate", "all", "--dataset", str(data), "--seed", "4", "--out", str(out)]) == 0
        assert kp.run_cli(["mix", "--corpus-dir", str(out), "--seed", "4"]) == 0
        assert kp.run_cli(["verify", str(out)]) == 0
        assert kp.run_cli(["generate", "nope", "--dataset", str(data), "--seed", "4", "--out", str(out)]) == 1

    print("python smoke test passed")


if __name__ == "__main__":
    main()
