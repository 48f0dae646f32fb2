import json

import numpy as np
import pytest

from simplex_drift import config as cfgmod
from simplex_drift.baselines import HomogeneousChain
from simplex_drift.io import (DataError, read_chain_archive, read_directions_csv, read_pairs_csv,
                              spec_hash, write_chain_archive, write_directions_csv, write_pairs_csv)
from simplex_drift.sampler import PosteriorChain


def test_directions_csv_lossless(tmp_path, rng):
    for D in (2, 4):
        locs = rng.dirichlet(np.ones(D + 1), 20)
        dirs = rng.uniform(0, 2 * np.pi, (20, 1 if D == 2 else D - 1))
        th = rng.uniform(0, 1.5, 20)
        p = tmp_path / f"d{D}.csv"
        write_directions_csv(p, [f"r{i}" for i in range(20)], locs, th, dirs)
        ids, l2, t2, d2 = read_directions_csv(str(p))
        np.testing.assert_array_equal(l2, locs)
        np.testing.assert_array_equal(t2, th)
        np.testing.assert_array_equal(d2.reshape(dirs.shape), dirs)


def test_pairs_csv_roundtrip(tmp_path, rng):
    p, q = rng.dirichlet(np.ones(4), (2, 5))
    write_pairs_csv(tmp_path / "p.csv", list("abcde"), p, q)
    ids, p2, q2 = read_pairs_csv(str(tmp_path / "p.csv"))
    assert ids == list("abcde")
    np.testing.assert_array_equal(p2, p)


def test_malformed_rows_report_line(tmp_path):
    f = tmp_path / "bad.csv"
    f.write_text("location_id,p_1,p_2,p_3,theta2,y_1\na,0.2,0.3,0.5,0.1,1.0\nb,0.2,0.3,0.6,0.1,1.0\n")
    with pytest.raises(DataError, match=":3:"):
        read_directions_csv(str(f))
    f.write_text("location_id,p_1,p_2,p_3,theta2,y_1\na,0.2,x,0.5,0.1,1.0\n")
    with pytest.raises(DataError, match=":2:"):
        read_directions_csv(str(f))
    with pytest.raises(DataError):
        read_directions_csv(str(tmp_path / "missing.csv"))


def test_chain_archive_roundtrip(tmp_path, rng):
    ch = PosteriorChain(rng.standard_normal((3, 2, 2, 4)), rng.standard_normal((3, 2, 4)),
                        rng.standard_normal((3, 2)), rng.integers(0, 2, (3, 4)), rng.dirichlet([1, 1], 3),
                        acceptance_stats={"hmc_accept_rate": 0.7})
    write_chain_archive(tmp_path / "c.jsonl", [ch, ch], {"model": "SvM-c", "seed": 3})
    header, chains = read_chain_archive(str(tmp_path / "c.jsonl"))
    assert header["seed"] == 3 and len(chains) == 2
    for f in ("z", "varphi", "nu", "zeta", "lam"):
        np.testing.assert_array_equal(getattr(chains[1], f), getattr(ch, f))
    assert chains[0].acceptance_stats == {"hmc_accept_rate": 0.7}
    lines = (tmp_path / "c.jsonl").read_text().splitlines()
    assert len(lines) == 1 + 6 + 2 and json.loads(lines[0])["format"] == "simplex-drift-chain"

    h = HomogeneousChain(rng.standard_normal((2, 1, 3)), rng.standard_normal((2, 1)), np.ones((2, 1)),
                         np.zeros((2, 5), np.int64))
    write_chain_archive(tmp_path / "h.jsonl", [h], {"model": "iV"})
    _, (h2,) = read_chain_archive(str(tmp_path / "h.jsonl"))
    np.testing.assert_array_equal(h2.w, h.w)


def test_spec_hash_canonical():
    assert spec_hash({"a": 1, "b": [1.0, 2.0]}) == spec_hash({"b": np.array([1.0, 2.0]), "a": 1})
    assert spec_hash({"a": 1}) != spec_hash({"a": 2})


def test_config_validation_messages(tmp_path):
    f = tmp_path / "c.yaml"
    f.write_text("sampler:\n  iterations: 10\n  burn_in: 20\n")
    with pytest.raises(cfgmod.ConfigError, match="sampler"):
        cfgmod.load_config(str(f))
    f.write_text("model:\n  type: SvM\n  K: 3\n")
    with pytest.raises(cfgmod.ConfigError, match="model"):
        cfgmod.load_config(str(f))
    f.write_text("model: {kernel: {omega: -1}}\n")
    with pytest.raises(cfgmod.ConfigError, match="model.kernel.omega"):
        cfgmod.load_config(str(f))
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.load_config(str(tmp_path / "none.yaml"))


def test_config_conversions(tmp_path):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"seed": 4, "model": {"type": "SvM-c"}, "sampler": {"iterations": 50, "burn_in": 10}}))
    cfg = cfgmod.load_config(str(f))
    spec = cfgmod.model_spec(cfg, 2)
    assert spec.K == 2 and spec.kernel.omega == 0.2
    np.testing.assert_allclose(spec.gp_means, [[0, 1], [0, -1]], atol=1e-15)
    assert cfgmod.model_spec(cfg, 5).kernel.omega == 0.1
    np.testing.assert_array_equal(cfgmod.default_gp_means(2, 5)[0], [1, 1, -1, -1, -1])
    np.testing.assert_array_equal(cfgmod.default_gp_means(1, 2), [[-1.0, 0.0]])
    s = cfgmod.sampler_config(cfg, 4)
    assert s.iterations == 50 and s.seed == 4
