import json
import os

import numpy as np
import pytest

from simplex_drift.cli import main
from simplex_drift.io import write_pairs_csv

CFG = """seed: 5
model: {type: %s}
sampler: {iterations: 120, burn_in: 60, thin: 5, chains: 2, em_restarts: 1, em_max_iters: 20}
scenario: {scenario: %s, n_train: 40, n_test: 8}
predict: {M: 4, max_draws: 6}
"""


def _cfg(tmp_path, model="SvM", scenario="SvM", name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(CFG % (model, scenario))
    return str(p)


def _pipeline(tmp_path, out, cfg):
    out = str(tmp_path / out)
    assert main(["simulate", "--config", cfg, "--output", out]) == 0
    assert main(["fit", "--config", cfg, "--data", f"{out}/train.csv", "--output", out]) == 0
    assert main(["predict", "--config", cfg, "--archive", f"{out}/chains.jsonl", "--data", f"{out}/train.csv",
                 "--test", f"{out}/test.csv", "--output", out]) == 0
    assert main(["diagnose", "--config", cfg, "--archive", f"{out}/chains.jsonl", "--truth",
                 f"{out}/truth.json", "--output", out]) == 0
    return out


def test_pipeline_byte_identical(tmp_path):
    cfg = _cfg(tmp_path)
    a = _pipeline(tmp_path, "a", cfg)
    b = _pipeline(tmp_path, "b", cfg)
    names = sorted(os.listdir(a))
    assert names == sorted(os.listdir(b))
    for n in names:
        assert open(os.path.join(a, n), "rb").read() == open(os.path.join(b, n), "rb").read(), n
    diag = json.load(open(os.path.join(a, "diagnostics.json")))
    assert "recovery" in diag and 0 <= diag["recovery"]["coverage"] <= 1


def test_iv_pipeline_and_select(tmp_path):
    cfg = _cfg(tmp_path, "iV", "iV")
    out = _pipeline(tmp_path, "iv", cfg)
    assert main(["select", "--reports", f"{out}/predictive.json", "--output", out]) == 0
    assert json.load(open(f"{out}/selection.json"))["selected"] == "iV"


def test_extract(tmp_path, rng):
    p = rng.dirichlet(np.ones(3), 4)
    q = rng.dirichlet(np.ones(3), 4)
    q[1] = p[1]
    p[3], q[3] = p[2], q[2]
    write_pairs_csv(tmp_path / "pairs.csv", ["a", "b", "c", "d"], p, q)
    out = str(tmp_path / "e")
    assert main(["extract", "--input", str(tmp_path / "pairs.csv"), "--output", out, "--check-roundtrip"]) == 0
    rep = json.load(open(f"{out}/extract_report.json"))
    assert rep["degenerate"] == 1 and rep["duplicate"] == 1 and rep["written"] == 2
    assert rep["max_roundtrip_error"] < 1e-6


def test_extract_malformed_removes_output(tmp_path):
    f = tmp_path / "pairs.csv"
    f.write_text("location_id,p_1,p_2,p_3,q_1,q_2,q_3\na,0.2,0.3,0.5,0.3,0.3,0.4\nb,0.2,0.3,0.5,0.9,0.9,0.9\n")
    out = tmp_path / "e"
    assert main(["extract", "--input", str(f), "--output", str(out)]) == 3
    assert not (out / "directions.csv").exists()


def test_exit_codes(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("model: {bogus: 1}\n")
    assert main(["fit", "--config", str(bad), "--data", "x.csv"]) == 2
    assert main(["fit", "--config", _cfg(tmp_path), "--data", str(tmp_path / "missing.csv")]) == 3
    assert main(["predict", "--config", _cfg(tmp_path), "--output", str(tmp_path)]) == 2


def test_threads_env_same_output(tmp_path, monkeypatch):
    cfg = _cfg(tmp_path)
    out = str(tmp_path / "s")
    assert main(["simulate", "--config", cfg, "--output", out]) == 0
    assert main(["fit", "--config", cfg, "--data", f"{out}/train.csv", "--output", f"{out}/1"]) == 0
    monkeypatch.setenv("SIMPLEX_DRIFT_THREADS", "2")
    assert main(["fit", "--config", cfg, "--data", f"{out}/train.csv", "--output", f"{out}/2"]) == 0
    assert open(f"{out}/1/chains.jsonl", "rb").read() == open(f"{out}/2/chains.jsonl", "rb").read()
