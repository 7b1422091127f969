import json

import numpy as np
import pytest

from czbloom.cli import main, run_config


def strip_timing(doc):
    doc = dict(doc)
    doc.pop("timing", None)
    return doc


def test_space_profile_stdout(capsys):
    rc = main(["space", "profile", "--space", "gen:grid-1d:8"])
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["A0"] == 1.0 and doc["n"] == 8


def test_space_profile_from_file(tmp_path, capsys):
    doc = {"points": [0, 1, 2], "measure": [1, 1, 1],
           "metric_matrix": [[0, 1, 2], [1, 0, 1], [2, 1, 0]]}
    p = tmp_path / "space.json"
    p.write_text(json.dumps(doc))
    assert main(["space", "profile", "--space", str(p)]) == 0
    assert json.loads(capsys.readouterr().out)["n"] == 3


def test_space_validation_exit_code(tmp_path, capsys):
    doc = {"points": [0, 1], "measure": [1, -1],
           "metric_matrix": [[0, 1], [1, 0]]}
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(doc))
    assert main(["space", "profile", "--space", str(p)]) == 2


def test_dyadic_build_and_verify(capsys):
    assert main(["dyadic", "build", "--space", "gen:grid-1d:8"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["passed"] and "system" in doc
    assert main(["dyadic", "verify", "--space", "gen:grid-1d:8"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["passed"] and "system" not in doc


def test_weights_subcommands(tmp_path, capsys):
    w = tmp_path / "w.json"
    w.write_text(json.dumps([1.0, 1.0, 1.0, 4.0]))
    assert main(["weights", "char", "--space", "gen:grid-1d:4",
                 "--weights", str(w), "--p", "2"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["ap"] >= 1.0

    b = tmp_path / "b.json"
    b.write_text(json.dumps([0.0, 1.0, 0.0, 1.0]))
    assert main(["weights", "bmo", "--space", "gen:grid-1d:4",
                 "--b", str(b)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["norm"] > 0 and doc["witness"] is not None

    assert main(["weights", "s2", "--space", "gen:grid-1d:6",
                 "--lambda1", "gen:1:0.4", "--lambda2", "gen:2:0.4",
                 "--p", "2", "--q", "4"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["passed"]


def test_kernel_certify(capsys):
    assert main(["kernel", "certify", "--space", "gen:grid-1d:8",
                 "--kernel", "hilbert-grid"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["c_K"] > 0 and doc["adjoint_size"]["ok"]


def test_op_norm_methods(capsys):
    assert main(["op", "norm", "--space", "gen:grid-1d:4",
                 "--kernel", "hilbert-grid", "--method", "svd-exact"]) == 0
    svd = json.loads(capsys.readouterr().out)["lower"]
    assert main(["op", "norm", "--space", "gen:grid-1d:4",
                 "--kernel", "hilbert-grid", "--method", "brute-oracle"]) == 0
    brute = json.loads(capsys.readouterr().out)["lower"]
    assert brute == pytest.approx(svd, rel=1e-6)
    # capability exhaustion: brute oracle on a space that is too large
    assert main(["op", "norm", "--space", "gen:grid-1d:12",
                 "--kernel", "hilbert-grid", "--method", "brute-oracle"]) == 3


def test_verify_upper_and_lower(capsys):
    assert main(["verify", "upper", "--space", "gen:grid-1d:12",
                 "--kernel", "power-sign", "--b", "gen:3"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["max_ratio"] > 0

    assert main(["verify", "lower", "--method", "awf",
                 "--space", "gen:grid-1d:16", "--kernel", "power-sign",
                 "--b", "gen:3"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["final_ratio"] > 0
    assert main(["verify", "lower", "--method", "median",
                 "--space", "gen:grid-1d:16", "--kernel", "power-sign",
                 "--b", "gen:3"]) == 0


def test_awf_and_median_decompose(capsys):
    assert main(["awf", "decompose", "--space", "gen:grid-1d:32",
                 "--kernel", "power-sign", "--b", "gen:5",
                 "--center", "10", "--radius", "2"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["left"] > 0 and doc["residual"] <= 1e-9

    assert main(["median", "decompose", "--space", "gen:grid-1d:32",
                 "--kernel", "power-sign", "--b", "gen:5",
                 "--center", "10", "--radius", "2"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert set(doc) >= {"median", "E1", "E2", "F1", "F2"}


def test_run_minimal_config(tmp_path, capsys):
    cfg = {"space": {"generator": "grid-1d", "size": 8},
           "kernel": {"family": "hilbert-grid"},
           "exponents": {"p": 2, "q": 2},
           "suites": ["lemma-s2"]}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert main(["run", str(path)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["suites"]["lemma-s2"]["passed"]
    assert not doc["violations"]


def test_run_determinism(tmp_path):
    cfg = {"space": {"generator": "random-cloud", "size": 12, "seed": 4},
           "kernel": {"family": "riesz-like"},
           "weights": {"lambda1": {"generator": {"seed": 1, "sigma": 0.3}},
                       "lambda2": {"generator": {"seed": 2, "sigma": 0.3}}},
           "symbol": {"generator": {"seed": 3}},
           "exponents": {"p": 2, "q": 2},
           "suites": ["lemma-s2", "dyadic", "kernel-cert"]}
    r1 = strip_timing(run_config(cfg))
    r2 = strip_timing(run_config(cfg))
    assert json.dumps(r1, sort_keys=True, default=str) == \
        json.dumps(r2, sort_keys=True, default=str)


def test_run_bad_exponents(tmp_path):
    cfg = {"space": {"generator": "grid-1d", "size": 8},
           "exponents": {"p": 4, "q": 2}, "suites": ["lemma-s2"]}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert main(["run", str(path)]) == 2


def test_run_full_suites(tmp_path, capsys):
    cfg = {"space": {"generator": "grid-1d", "size": 16},
           "kernel": {"family": "power-sign"},
           "symbol": {"generator": {"seed": 9}},
           "exponents": {"p": 2, "q": 2},
           "suites": ["dyadic", "kernel-cert", "lemma-s2", "upper",
                      "lower-awf", "lower-median"]}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    rc = main(["run", str(path), "--out", str(tmp_path / "report.json")])
    assert rc == 0
    doc = json.loads((tmp_path / "report.json").read_text())
    assert set(doc["suites"]) == set(cfg["suites"])
    assert doc["suites"]["lower-awf"]["final_ratio"] > 0
