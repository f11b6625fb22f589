import json

import numpy as np
import pytest

from errest.cli import main
from errest.data import load_dataset
from errest.experiments import read_result_csv
from errest.hierarchy import read_tree
from errest.splitters import read_plan


def run(argv):
    return main([str(a) for a in argv])


def write_demo_csv(path, rng, n=30, with_pi=False, with_cluster=True):
    lines = ["x1,x2,y" + (",cluster" if with_cluster else "") + (",pi" if with_pi else "")]
    for i in range(n):
        x1, x2 = (float(v) for v in rng.standard_normal(2))
        y = x1 - x2 + 0.1 * float(rng.standard_normal())
        cells = [repr(x1), repr(x2), repr(y)]
        if with_cluster:
            cells.append(str(i % 5))
        if with_pi:
            cells.append(repr(0.05 + 0.01 * (i % 3)))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")
    return path


def test_simulate_clustered(tmp_path):
    cfg = tmp_path / "gen.json"
    cfg.write_text(json.dumps({"M": 5, "n_m": 4, "sigma2_1": 1.0}))
    out = tmp_path / "data.csv"
    assert run(["simulate", "clustered", "--config", cfg, "--out", out, "--seed", 3]) == 0
    d = load_dataset(out)
    assert d.n == 20 and d.p == 5
    assert d.cluster_id is not None


def test_simulate_hierarchical_with_tree(tmp_path):
    cfg = tmp_path / "gen.json"
    cfg.write_text(json.dumps({"n_leaves": 6, "internal_nodes": 5, "n_train": 40}))
    out = tmp_path / "data.csv"
    tree_out = tmp_path / "tree.txt"
    assert run(["simulate", "hierarchical", "--config", cfg, "--out", out,
                "--tree-out", tree_out, "--seed", 1]) == 0
    tree = read_tree(tree_out)
    d = load_dataset(out, tree=tree)
    assert d.label_kind == "hierarchical"
    assert len(tree.leaves) == 6


def test_split_same_seed_identical_bytes(tmp_path, rng):
    data = write_demo_csv(tmp_path / "d.csv", rng)
    a, b = tmp_path / "a.plan", tmp_path / "b.plan"
    args = ["split", "--scheme", "grouped-kfold", "--k", 3, "--data", data, "--seed", 11]
    assert run(args + ["--out", a]) == 0
    assert run(args + ["--out", b]) == 0
    assert a.read_bytes() == b.read_bytes()
    plan = read_plan(a)
    assert plan.scheme == "grouped_kfold" and len(plan) == 3


def test_evaluate_with_plan_file(tmp_path, rng):
    data = write_demo_csv(tmp_path / "d.csv", rng)
    plan = tmp_path / "p.plan"
    assert run(["split", "--scheme", "kfold", "--k", 5, "--data", data,
                "--seed", 2, "--out", plan]) == 0
    assert run(["evaluate", "--data", data, "--plan", plan,
                "--learner", "ols", "--metric", "mse"]) == 0


def test_evaluate_size_mismatch_names_both_sizes(tmp_path, rng, capsys):
    data = write_demo_csv(tmp_path / "d.csv", rng, n=30)
    small = write_demo_csv(tmp_path / "small.csv", rng, n=10)
    plan = tmp_path / "p.plan"
    assert run(["split", "--scheme", "kfold", "--k", 5, "--data", data,
                "--seed", 2, "--out", plan]) == 0
    assert run(["evaluate", "--data", small, "--plan", plan,
                "--learner", "ols", "--metric", "mse"]) == 1
    err = capsys.readouterr().err
    assert "30" in err and "10" in err


def test_evaluate_with_design_column(tmp_path, rng, capsys):
    data = write_demo_csv(tmp_path / "d.csv", rng, with_pi=True, with_cluster=False)
    assert run(["evaluate", "--data", data, "--scheme", "kfold", "--k", 3, "--seed", 4,
                "--learner", "ols", "--metric", "mse",
                "--design", "pi", "--population-size", 500]) == 0
    out = capsys.readouterr().out
    assert "mse_ht=" in out


def test_evaluate_design_requires_population(tmp_path, rng, capsys):
    data = write_demo_csv(tmp_path / "d.csv", rng, with_pi=True, with_cluster=False)
    assert run(["evaluate", "--data", data, "--scheme", "kfold", "--learner", "ols",
                "--metric", "mse", "--design", "pi"]) == 1
    assert "population-size" in capsys.readouterr().err


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as exc:
        run(["frobnicate"])
    assert exc.value.code == 2


def test_study_command_writes_schema_csv(tmp_path):
    cfg = tmp_path / "study.json"
    cfg.write_text(json.dumps({
        "study": "clustered",
        "replicates": 2,
        "seed": 9,
        "config": {
            "settings": [{"M": 6, "n_m": 4, "sigma2_1": 1.0}],
            "learners": ["ols"],
            "repeats": 2,
        },
    }))
    out = tmp_path / "r.csv"
    assert run(["study", "--config", cfg, "--out", out]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "#schema=1"
    assert lines[1] == "replicate,setting,method,estimate"
    result = read_result_csv(out)
    assert len(result.rows) == 4  # 2 replicates x 1 setting x 2 methods


def test_study_config_rejects_unknown_keys(tmp_path, capsys):
    cfg = tmp_path / "study.json"
    cfg.write_text(json.dumps({
        "study": "clustered",
        "config": {"settings": [{"M": 4, "n_m": 2}], "bogus_key": 1},
    }))
    assert run(["study", "--config", cfg, "--out", tmp_path / "r.csv"]) == 1
    assert "bogus_key" in capsys.readouterr().err


def test_study_seed_override_changes_results(tmp_path):
    cfg = tmp_path / "study.json"
    cfg.write_text(json.dumps({
        "study": "clustered",
        "replicates": 1,
        "seed": 1,
        "config": {"settings": [{"M": 6, "n_m": 4}], "learners": ["ols"], "repeats": 1},
    }))
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["study", "--config", cfg, "--out", out1]) == 0
    assert run(["study", "--config", cfg, "--out", out2, "--seed", 2]) == 0
    assert out1.read_text() != out2.read_text()
