import warnings

import numpy as np
import pytest

from simplex_drift.gp import KernelConfig
from simplex_drift.model import Dataset, ModelSpec, ParameterState, component_factors, gp_mean_array
from simplex_drift import sampler as smp
from simplex_drift.sampler import SamplerConfig
from simplex_drift.simulate import ScenarioConfig, generate
from conftest import random_simplex


def _problem(rng, N=8, D=2, K=1, **kw):
    y = rng.standard_normal((N, D))
    data = Dataset(random_simplex(rng, D, N), y / np.linalg.norm(y, axis=1, keepdims=True))
    spec = ModelSpec(K=K, D=D, gp_means=rng.normal(0, 1, (K, D)), **kw)
    state = ParameterState(rng.standard_normal((K, D, N)), rng.normal(0.5, 0.3, (K, N)),
                           rng.normal(0.5, 0.2, K), rng.integers(0, K, N))
    return spec, data, state


def test_labels_degenerate_lambda(rng):
    spec, data, state = _problem(rng, K=2, lam=[1.0, 0.0])
    assert np.all(smp.sample_labels(spec, state, data, rng) == 0)


def test_labels_identical_components(rng):
    spec, data, state = _problem(rng, N=5, K=2, lam=[0.3, 0.7])
    state.z[1], state.varphi[1] = state.z[0], state.varphi[0]
    freq = np.mean([smp.sample_labels(spec, state, data, rng) for _ in range(4000)])
    assert abs(freq - 0.7) < 0.02


def test_labels_hand_case(rng):
    spec, data, state = _problem(rng, N=1, K=2, lam=[0.25, 0.75])
    rho = np.exp(state.varphi[:, 0])
    m = state.z[:, :, 0] / np.linalg.norm(state.z[:, :, 0], axis=1, keepdims=True)
    from scipy.special import i0
    f = np.exp(rho * (m @ data.obs[0])) / (2 * np.pi * i0(rho))
    p1 = 0.75 * f[1] / (0.25 * f[0] + 0.75 * f[1])
    got = np.exp(smp.label_log_probs(spec, state, data))[:, 0]
    assert got[1] / got.sum() == pytest.approx(p1, rel=1e-12)


def test_ess_constant_likelihood_accepts_first_proposal(rng):
    f0, nu = rng.standard_normal((2, 4))
    f, shrinks = smp._ess(f0, nu, lambda f: 0.0, rng)
    assert shrinks == 0
    # the accepted point lies on the ellipse through f0 and nu
    c, s = np.linalg.lstsq(np.column_stack([f0, nu]), f, rcond=None)[0]
    np.testing.assert_allclose(c * f0 + s * nu, f, atol=1e-12)
    assert c * c + s * s == pytest.approx(1.0, abs=1e-12)


def test_ess_never_decreases_threshold(rng):
    f0 = np.array([0.2])
    for _ in range(200):
        thr_base = -50 * (f0[0] - 1.0) ** 2
        f, _ = smp._ess(f0, rng.standard_normal(1), lambda f: -50 * (f[0] - 1.0) ** 2, rng)
        # accepted states sit above a slice level drawn below the current value
        assert -50 * (f[0] - 1.0) ** 2 > thr_base + np.log(1e-300)
        f0 = f


def test_ess_2d_constant_likelihood_preserves_prior(rng):
    N = 5
    locs = random_simplex(rng, 2, N)
    data = Dataset(locs, np.tile([1.0, 0.0], (N, 1)))
    spec = ModelSpec(K=1, D=2, gp_means=np.array([[0.5, -0.3]]))
    state = ParameterState(np.zeros((1, 2, N)), np.full((1, N), -40.0), [0.0], np.zeros(N))
    factors = component_factors(spec, locs)
    draws = np.empty((10_000, 2, N))
    for i in range(10_000):
        state.z, _ = smp.ess_update_2d(spec, state, data, 0, rng, factors)
        draws[i] = state.z[0]
    Sig = factors[0].matrix
    for d in range(2):
        assert np.max(np.abs(draws[:, d].mean(0) - spec.gp_means[0, d])) < 0.05
        emp = np.cov(draws[:, d], rowvar=False)
        assert np.linalg.norm(emp - Sig) / np.linalg.norm(Sig) < 0.05


def test_ess_highdim_updates_one_coordinate(rng):
    spec, data, state = _problem(rng, D=4)
    factors = component_factors(spec, data.locations)
    mu = gp_mean_array(spec, data.N)
    before = state.z.copy()
    state.z, _ = smp.ess_update_highdim(spec, state, data, 0, 2, rng, factors, mu)
    for d in (0, 1, 3):
        np.testing.assert_array_equal(state.z[0, d], before[0, d])
    assert not np.array_equal(state.z[0, 2], before[0, 2])


@pytest.mark.parametrize("D, K", [(2, 1), (2, 2), (5, 1), (4, 3)])
def test_hmc_gradient_fd(rng, D, K):
    for _ in range(10):
        spec, data, state = _problem(rng, N=6, D=D, K=K)
        p = rng.standard_normal((K, 6))
        v = rng.normal(0.5, 0.5, K)
        _, gp, gn = smp.concentration_potential(spec, state, data, p, v)
        h = 1e-5
        for idx in np.ndindex(p.shape):
            e = np.zeros_like(p)
            e[idx] = h
            fd = (smp.concentration_potential(spec, state, data, p + e, v)[0]
                  - smp.concentration_potential(spec, state, data, p - e, v)[0]) / (2 * h)
            assert abs(fd - gp[idx]) <= 1e-5 * max(abs(gp[idx]), 1e-2)
        for k in range(K):
            e = np.zeros(K)
            e[k] = h
            fd = (smp.concentration_potential(spec, state, data, p, v + e)[0]
                  - smp.concentration_potential(spec, state, data, p, v - e)[0]) / (2 * h)
            assert abs(fd - gn[k]) <= 1e-5 * max(abs(gn[k]), 1e-2)


def test_hmc_tiny_step_always_accepts(rng):
    spec, data, state = _problem(rng)
    cfg = SamplerConfig(iterations=2, burn_in=0, hmc_leapfrog_steps=1)
    probs = [smp.hmc_update(spec, state, data, cfg, rng, step_size=1e-6)[3] for _ in range(50)]
    assert min(probs) > 1 - 1e-6


def test_hmc_energy_error_scales_quadratically(rng):
    spec, data, state = _problem(rng, N=10)
    cfg = SamplerConfig(iterations=2, burn_in=0, hmc_leapfrog_steps=10)
    errs = []
    for eps in (0.02, 0.01, 0.005):
        r = np.random.default_rng(1)
        p = np.mean([-np.log(max(smp.hmc_update(spec, state, data, cfg, np.random.default_rng(s),
                                                step_size=eps)[3], 1e-300)) for s in range(30)])
        errs.append(p)
    slope = np.polyfit(np.log([0.02, 0.01, 0.005]), np.log(np.maximum(errs, 1e-300)), 1)[0]
    assert slope > 1.5


def test_block_purity(rng):
    spec, data, state = _problem(rng, K=2)
    s0 = state.copy()
    smp.sample_labels(spec, state, data, rng)
    np.testing.assert_array_equal(state.z, s0.z)
    z, _ = smp.ess_update_2d(spec, state, data, 0, rng)
    np.testing.assert_array_equal(state.varphi, s0.varphi)
    cfg = SamplerConfig(iterations=2, burn_in=0)
    smp.hmc_update(spec, state, data, cfg, rng)
    np.testing.assert_array_equal(state.z, s0.z)
    np.testing.assert_array_equal(state.zeta, s0.zeta)


def test_run_chain_storage_and_determinism(rng):
    spec, data, state = _problem(rng)
    cfg = SamplerConfig(iterations=11, burn_in=10, thin=1, chains=1)
    ch = smp.run_chain(spec, data, state, cfg, np.random.default_rng(0))
    assert len(ch) == 1
    cfg = SamplerConfig(iterations=60, burn_in=20, thin=5, chains=1)
    a = smp.run_chain(spec, data, state, cfg, np.random.default_rng(5))
    b = smp.run_chain(spec, data, state, cfg, np.random.default_rng(5))
    assert len(a) == 8
    for f in ("z", "varphi", "nu", "zeta", "lam"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f))
    assert set(a.acceptance_stats) == {"hmc_accept_rate", "hmc_mean_accept_prob", "ess_mean_shrinks"}


def test_sampler_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(iterations=10, burn_in=10)
    assert SamplerConfig.preset("highdim").burn_in == 20000
    assert SamplerConfig.preset("2d").n_draws == 1000


def test_k1_recovery_of_constant_mean():
    rng = np.random.default_rng(11)
    N = 200
    locs = random_simplex(rng, 2, N)
    from simplex_drift.distributions import vm_sample
    y = vm_sample(np.pi, 5.0, rng, size=N)
    data = Dataset(locs, np.column_stack([np.cos(y), np.sin(y)]))
    spec = ModelSpec(K=1, D=2, gp_means=np.array([[-1.0, 0.0]]))
    from simplex_drift.em_init import run_em
    _, init = run_em(spec, data, restarts=1, rng=rng)
    ch = smp.run_chain(spec, data, init, SamplerConfig(iterations=1000, burn_in=500, thin=5, chains=1), rng)
    ang = np.arctan2(ch.z[:, 0, 1], ch.z[:, 0, 0])
    m = np.mod(np.arctan2(np.sin(ang).mean(), np.cos(ang).mean()), 2 * np.pi)
    assert abs(m - np.pi) < 0.15


def test_tune_step_size_hits_target():
    tr, _, _ = generate(ScenarioConfig("SvM", n_train=80, n_test=1, seed=3))
    spec = ModelSpec(K=1, D=2, gp_means=np.array([[-1.0, 0.0]]))
    from simplex_drift.em_init import run_em
    _, init = run_em(spec, tr, restarts=1, rng=np.random.default_rng(0))
    eps = smp.tune_step_size(spec, tr, init, 0.75, np.random.default_rng(1))
    again = smp.tune_step_size(spec, tr, init, 0.75, np.random.default_rng(1))
    assert eps == again
    # independent window of full sweeps after a 200-sweep burn-in at eps
    cfg = SamplerConfig(iterations=2, burn_in=0)
    factors = component_factors(spec, tr.locations)
    mu = gp_mean_array(spec, tr.N)
    state, lam, r = init.copy(), spec.lam, np.random.default_rng(2)
    for _ in range(200):
        state, lam, _, _, _ = smp.gibbs_sweep(spec, state, tr, cfg, r, factors, mu, lam, eps)
    acc = []
    for _ in range(400):
        state, lam, a, _, _ = smp.gibbs_sweep(spec, state, tr, cfg, r, factors, mu, lam, eps)
        acc.append(a)
    assert 0.65 <= np.mean(acc) <= 0.85


def test_tune_step_size_absurd_target(rng):
    spec, data, state = _problem(rng)
    with pytest.warns(RuntimeWarning):
        assert smp.tune_step_size(spec, data, state, 0.999, rng) == 0.01
