import numpy as np
import pytest

from simplex_drift.baselines import HomogeneousFit, HomogeneousSpec, _slice_1d, fit_homogeneous
from simplex_drift.simulate import ScenarioConfig, generate


def test_slice_sampler_targets_normal():
    rng = np.random.default_rng(0)
    x, xs = 0.0, []
    for _ in range(20_000):
        x = _slice_1d(x, lambda t: -0.5 * (t - 1.0) ** 2 / 4.0, rng)
        xs.append(x)
    assert abs(np.mean(xs) - 1.0) < 0.1
    assert abs(np.std(xs) - 2.0) < 0.1


def test_iv_recovery():
    tr, _, _ = generate(ScenarioConfig("iV", n_train=300, n_test=1, seed=2))
    ch = fit_homogeneous(HomogeneousSpec(K=1, D=2), tr.obs, 1500, 500, 5, np.random.default_rng(1))
    m = ch.means[:, 0]
    ang = np.mod(np.arctan2(m[:, 1].mean(), m[:, 0].mean()), 2 * np.pi)
    assert abs(ang - np.pi) < 0.1
    assert abs(np.exp(ch.varphi[:, 0]).mean() - 5.0) < 1.0


def test_ivm_highdim_recovery():
    tr, _, _ = generate(ScenarioConfig("iVM", D=5, n_train=300, n_test=1, seed=2))
    ch = fit_homogeneous(HomogeneousSpec(K=2, D=5), tr.obs, 1000, 500, 5, np.random.default_rng(1))
    lam = np.sort(ch.lam.mean(axis=0))
    np.testing.assert_allclose(lam, [0.3, 0.7], atol=0.1)


def test_predictive_params_shapes():
    tr, _, _ = generate(ScenarioConfig("iVM", n_train=50, n_test=1, seed=2))
    spec = HomogeneousSpec(K=2, D=2)
    ch = fit_homogeneous(spec, tr.obs, 60, 50, 2, np.random.default_rng(1))
    lam, units, rho = HomogeneousFit(spec, ch).predictive_params(0, np.ones((4, 3)) / 3, None)
    assert units.shape == (2, 4, 2) and rho.shape == (2, 4)
    np.testing.assert_allclose(np.linalg.norm(units, axis=2), 1.0)
    with pytest.raises(ValueError):
        HomogeneousSpec(K=2, D=2, prior_mean=np.zeros((1, 2)))
