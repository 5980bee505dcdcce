"""End-to-end engine runs: snapshot schedule, incremental-vs-recompute
agreement, steering, error handling, and the workload generator."""

import json
import math
import os
import random

import pytest

import oracles
from ringview.config import load_config
from ringview.engine import Engine, SteerCommand, bench, run, run_oracle
from ringview.errors import SteerRejectedError
from ringview.workload import gen_workload


def approx_doc(a, b, rtol=1e-9, atol=1e-9, path=""):
    """Recursive approximate equality for snapshot documents."""
    if isinstance(a, dict) and isinstance(b, dict):
        assert a.keys() == b.keys(), f"{path}: keys {a.keys()} != {b.keys()}"
        for k in a:
            approx_doc(a[k], b[k], rtol, atol, f"{path}.{k}")
    elif isinstance(a, list) and isinstance(b, list):
        assert len(a) == len(b), f"{path}: length {len(a)} != {len(b)}"
        for i, (x, y) in enumerate(zip(a, b)):
            approx_doc(x, y, rtol, atol, f"{path}[{i}]")
    elif isinstance(a, float) or isinstance(b, float):
        assert math.isclose(a, b, rel_tol=rtol, abs_tol=atol), \
            f"{path}: {a} != {b}"
    else:
        assert a == b, f"{path}: {a!r} != {b!r}"


PAIR_RELATIONS = [
    {"name": "R", "file": "R.csv", "attrs": [
        {"name": "A", "dtype": "int", "kind": "categorical"},
        {"name": "B", "dtype": "float"}]},
    {"name": "S", "file": "S.csv", "attrs": [
        {"name": "A", "dtype": "int", "kind": "categorical"},
        {"name": "C", "dtype": "float"},
        {"name": "D", "dtype": "float"}]},
]

PAIR_TREE = {"key": [], "children": [{"relation": "R", "key": ["A"]},
                                     {"relation": "S", "key": ["A"]}]}


def write_pair(tmp_path, stream_lines=None, mode="count", batch_size=1,
               **extra):
    (tmp_path / "R.csv").write_text("1,2.0\n2,1.0\n")
    (tmp_path / "S.csv").write_text("1,1.5,0.5\n1,0.5,1.5\n")
    config = {"relations": PAIR_RELATIONS, "mode": mode, "tree": PAIR_TREE,
              "batch_size": batch_size, **extra}
    if mode == "covar":
        config.setdefault("label", "D")
        config.setdefault("lambda", 0.1)
    if stream_lines is not None:
        (tmp_path / "stream.txt").write_text(
            "".join(line + "\n" for line in stream_lines))
        config["stream"] = "stream.txt"
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return load_config(str(path))


# --- schedule & snapshot shape ----------------------------------------------

def test_snapshot_schedule_is_batches_plus_initial(tmp_path):
    cfg_path = gen_workload(seed=1, out_dir=str(tmp_path), tuples=30,
                            updates=40, batch_size=8)
    eng = Engine(load_config(cfg_path))
    assert eng.run() == 0
    assert len(eng.snapshots) == 6  # ceil(40/8) batches + snapshot 0
    assert [s["seq"] for s in eng.snapshots] == list(range(6))
    assert eng.snapshots[0]["batch_updates"] == 0
    assert all(s["batch_updates"] == 8 for s in eng.snapshots[1:])
    assert eng.snapshots[-1]["updates_applied"] == 40
    assert eng.snapshots[-1]["batches_applied"] == 5


def test_ragged_final_batch(tmp_path):
    cfg_path = gen_workload(seed=2, out_dir=str(tmp_path), tuples=20,
                            updates=10, batch_size=4)
    eng = Engine(load_config(cfg_path))
    assert eng.run() == 0
    assert [s["batch_updates"] for s in eng.snapshots] == [0, 4, 4, 2]


def test_no_stream_gives_single_snapshot(tmp_path):
    cfg = write_pair(tmp_path, stream_lines=None)
    eng = Engine(cfg)
    assert eng.run() == 0
    assert len(eng.snapshots) == 1
    assert eng.snapshots[0]["analytics"] == {"root_count": 2}


def test_initial_count_is_join_cardinality(tmp_path):
    # R joins S on A: A=1 pairs 1 R-row with 2 S-rows, A=2 matches nothing.
    cfg = write_pair(tmp_path, stream_lines=["S,+1,2,9,9"])
    eng = Engine(cfg)
    assert eng.run() == 0
    assert eng.snapshots[0]["root"] == 2
    assert eng.snapshots[1]["root"] == 3  # A=2 now joins once
    assert eng.snapshots[1]["root_hash"] != eng.snapshots[0]["root_hash"]


def test_output_file_holds_one_snapshot_per_line(tmp_path):
    out = tmp_path / "snaps.jsonl"
    cfg = write_pair(tmp_path, stream_lines=["S,+1,2,9,9", "R,-1,2,1.0"],
                     output=str(out))
    assert Engine(cfg).run() == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 3
    docs = [json.loads(line) for line in lines]
    assert [d["seq"] for d in docs] == [0, 1, 2]
    assert docs[2]["root"] == 2  # the A=2 R-row is gone again


# --- incremental vs recompute ------------------------------------------------

CASES = [(2, "count", 11), (2, "covar", 12), (3, "covar", 13), (3, "mi", 14),
         (4, "count", 15), (4, "mi", 16)]


@pytest.mark.parametrize("relations,mode,seed", CASES)
def test_incremental_matches_full_recompute(tmp_path, relations, mode, seed):
    cfg_path = gen_workload(seed=seed, out_dir=str(tmp_path), tuples=60,
                            relations=relations, mode=mode, updates=50,
                            batch_size=10)
    cfg = load_config(cfg_path)
    inc = Engine(cfg)
    orc = Engine(cfg, oracle=True)
    assert inc.run() == 0
    assert orc.run() == 0
    assert len(inc.snapshots) == len(orc.snapshots) == 6
    for si, so in zip(inc.snapshots, orc.snapshots):
        approx_doc(si["root"], so["root"], rtol=1e-9, atol=1e-9)
        approx_doc(si["analytics"], so["analytics"], rtol=1e-6, atol=1e-8)


def test_count_roots_are_byte_identical_to_oracle(tmp_path):
    cfg_path = gen_workload(seed=21, out_dir=str(tmp_path), tuples=80,
                            relations=3, mode="count", updates=60,
                            batch_size=6)
    cfg = load_config(cfg_path)
    inc, orc = Engine(cfg), Engine(cfg, oracle=True)
    assert inc.run() == 0 and orc.run() == 0
    assert [s["root_hash"] for s in inc.snapshots] == \
           [s["root_hash"] for s in orc.snapshots]


def test_module_level_runners(tmp_path):
    cfg_path = gen_workload(seed=3, out_dir=str(tmp_path), tuples=20,
                            updates=10, batch_size=5)
    cfg = load_config(cfg_path)
    assert run(cfg) == 0
    assert run_oracle(cfg) == 0


# --- steering ----------------------------------------------------------------

def test_steer_ack_names_first_reflecting_snapshot(tmp_path):
    cfg = write_pair(tmp_path, stream_lines=["S,+1,2,9,9"], mode="covar")
    eng = Engine(cfg)
    ack = eng.submit_steer(SteerCommand("set_lambda", 0.5))
    assert ack == 0  # nothing emitted yet, so snapshot 0 reflects it
    assert eng.run() == 0
    assert eng.snapshots[0]["steering"]["lambda"] == 0.5
    assert eng.snapshots[0]["analytics"]["model"]["lambda"] == 0.5
    assert eng.snapshots[1]["steering"]["lambda"] == 0.5


def test_steer_applies_from_acked_snapshot_only(tmp_path):
    cfg = write_pair(tmp_path, stream_lines=["S,+1,2,9,9", "R,+1,3,1.0"],
                     mode="covar")
    eng = Engine(cfg)
    eng.prepare()
    fired = []

    def hook(seq, text):
        fired.append(seq)
        if seq == 0:
            # Arrives after snapshot 0 was sealed; first effect is seq 1.
            fired.append(("ack", eng.submit_steer(SteerCommand("set_lambda", 0.7))))

    eng.on_snapshot = hook
    assert eng.run() == 0
    assert ("ack", 1) in fired
    assert eng.snapshots[0]["steering"]["lambda"] == 0.1
    assert eng.snapshots[1]["steering"]["lambda"] == 0.7


def test_steer_set_features_restricts_model(tmp_path):
    cfg = write_pair(tmp_path, stream_lines=["S,+1,2,9,9"], mode="covar")
    eng = Engine(cfg)
    eng.submit_steer(SteerCommand("set_features", ["C"]))
    assert eng.run() == 0
    feats = eng.snapshots[0]["analytics"]["covar"]["features"]
    assert [f["name"] for f in feats] == ["intercept", "C"]


def test_steer_rejections(tmp_path):
    cfg = write_pair(tmp_path, stream_lines=["S,+1,2,9,9"], mode="covar")
    eng = Engine(cfg)
    for bad in [SteerCommand("set_label", "A"),      # key attr, not aggregated
                SteerCommand("set_label", "missing"),
                SteerCommand("set_lambda", -1.0),
                SteerCommand("set_lambda", "abc"),
                SteerCommand("set_features", ["nope"]),
                SteerCommand("set_features", "C"),
                SteerCommand("warp", 1)]:
        with pytest.raises(SteerRejectedError):
            eng.submit_steer(bad)


def test_no_data_is_reported_inside_snapshot_not_fatal(tmp_path):
    # Deleting the only joining R rows empties the join; the run continues
    # and the model returns once rows come back.
    cfg = write_pair(tmp_path,
                     stream_lines=["R,-1,1,2.0", "R,+1,1,2.0"],
                     mode="covar")
    eng = Engine(cfg)
    assert eng.run() == 0
    assert len(eng.snapshots) == 3
    assert "model" in eng.snapshots[0]["analytics"]
    assert "no data" in eng.snapshots[1]["analytics"]["error"]
    assert "model" in eng.snapshots[2]["analytics"]
    approx_doc(eng.snapshots[2]["analytics"]["covar"],
               eng.snapshots[0]["analytics"]["covar"])


def test_malformed_stream_aborts_with_batch_diagnostic(tmp_path):
    cfg = write_pair(tmp_path,
                     stream_lines=["S,+1,2,9,9", "R,+1,notanint,1.0"])
    eng = Engine(cfg)
    assert eng.run() == 1
    assert eng.error is not None
    assert "batch 1" in eng.error and "line 2" in eng.error
    assert len(eng.snapshots) == 2  # everything before the bad line survives


# --- workload generator --------------------------------------------------------

def _tree_files(root):
    out = {}
    for base, _, files in os.walk(root):
        for f in files:
            p = os.path.join(base, f)
            out[os.path.relpath(p, root)] = open(p, "rb").read()
    return out


def test_gen_workload_is_deterministic(tmp_path):
    a = gen_workload(seed=42, out_dir=str(tmp_path / "a"), tuples=50,
                     relations=3, mode="mi", updates=30)
    b = gen_workload(seed=42, out_dir=str(tmp_path / "b"), tuples=50,
                     relations=3, mode="mi", updates=30)
    fa, fb = _tree_files(tmp_path / "a"), _tree_files(tmp_path / "b")
    assert fa.keys() == fb.keys()
    for name in fa:
        assert fa[name] == fb[name], f"{name} differs between identical seeds"
    c = gen_workload(seed=43, out_dir=str(tmp_path / "c"), tuples=50,
                     relations=3, mode="mi", updates=30)
    assert open(c.replace("config.json", "stream.txt"), "rb").read() != \
        fa["stream.txt"]


def test_gen_workload_delete_semantics(tmp_path):
    gen_workload(seed=7, out_dir=str(tmp_path), tuples=40, updates=60,
                 delete_frac=0.0)
    lines = (tmp_path / "stream.txt").read_text().splitlines()
    assert len(lines) == 60
    assert all(line.split(",")[1] == "+1" for line in lines)

    gen_workload(seed=7, out_dir=str(tmp_path / "d"), tuples=40, updates=60,
                 delete_frac=0.5)
    dlines = (tmp_path / "d" / "stream.txt").read_text().splitlines()
    assert any(line.split(",")[1] == "-1" for line in dlines)


def test_gen_workload_deletes_only_live_tuples(tmp_path):
    cfg_path = gen_workload(seed=9, out_dir=str(tmp_path), tuples=30,
                            relations=2, updates=80, delete_frac=0.45)
    cfg = load_config(cfg_path)
    eng = Engine(cfg)
    assert eng.run() == 0
    for base in eng.bases.values():
        assert all(m > 0 for m in base.data.values())


@pytest.mark.parametrize("relations", [2, 3, 4, 5])
def test_gen_workload_all_shapes_run(tmp_path, relations):
    cfg_path = gen_workload(seed=relations, out_dir=str(tmp_path),
                            tuples=30, relations=relations, updates=20,
                            batch_size=10)
    assert run(load_config(cfg_path)) == 0


# --- bench --------------------------------------------------------------------

def test_bench_report_shape(tmp_path):
    cfg_path = gen_workload(seed=31, out_dir=str(tmp_path), tuples=60,
                            updates=40, batch_size=10)
    report = bench(load_config(cfg_path))
    assert report["updates"] == 40
    assert report["batches"] == 4
    assert report["incremental"]["propagate_s"] > 0
    assert report["incremental"]["updates_per_s"] > 0
    assert report["oracle"]["propagate_s"] > 0
    assert report["speedup"] > 0
