import numpy as np
import pytest
from scipy import special, stats

from simplex_drift.gp import KernelConfig
from simplex_drift.model import (Dataset, ModelSpec, ParameterState, component_loglik, log_joint,
                                 mean_direction, prepare_dataset)
from conftest import random_simplex


def _data(rng, N, D):
    y = rng.standard_normal((N, D))
    return Dataset(random_simplex(rng, D, N), y / np.linalg.norm(y, axis=1, keepdims=True))


def test_mean_direction_examples():
    s = ParameterState(np.array([[[1.0, 0.0], [0.0, -1.0]]]), np.zeros((1, 2)), [0.0], [0, 0])
    assert mean_direction(s, 0, 0) == 0.0
    assert mean_direction(s, 0, 1) == pytest.approx(3 * np.pi / 2)
    z = np.zeros((1, 5, 1))
    z[0, 2, 0] = 2.0
    s5 = ParameterState(z, np.zeros((1, 1)), [0.0], [0])
    np.testing.assert_array_equal(mean_direction(s5, 0, 0), np.eye(5)[2])
    with pytest.raises(ValueError):
        mean_direction(ParameterState(np.zeros((1, 3, 1)), np.zeros((1, 1)), [0.0], [0]), 0, 0)


def test_uniform_likelihood(rng):
    data = _data(rng, 7, 2)
    s = ParameterState(rng.standard_normal((1, 2, 7)), np.full((1, 7), -np.inf), [0.0], np.zeros(7))
    assert component_loglik(s, data).sum() == pytest.approx(-7 * np.log(2 * np.pi), rel=1e-14)


def test_log_joint_hand_oracle(rng):
    N, K, D = 3, 2, 2
    data = _data(rng, N, D)
    spec = ModelSpec(K=K, D=D, kernel=KernelConfig(sigma=0.6, omega=0.4),
                     gp_means=np.array([[0.5, 0.0], [0.0, -0.5]]), varsigma=0.3, tau=2.0, lam=[0.4, 0.6])
    s = ParameterState(rng.standard_normal((K, D, N)), rng.normal(1, 0.3, (K, N)), [1.1, 0.7], [0, 1, 1])
    # term-by-term with scipy
    total = 0.0
    for n in range(N):
        k = s.zeta[n]
        m = np.arctan2(s.z[k, 1, n], s.z[k, 0, n])
        y = np.arctan2(data.obs[n, 1], data.obs[n, 0])
        total += stats.vonmises.logpdf(y, np.exp(s.varphi[k, n]), loc=m) + np.log(spec.lam[k])
    x = data.locations
    Sig = 0.36 * np.exp(-0.5 * ((x[:, None] - x[None]) ** 2).sum(-1) / 0.16) + 1e-8 * np.eye(N)
    for k in range(K):
        for d in range(D):
            total += stats.multivariate_normal(np.full(N, spec.gp_means[k, d]), Sig).logpdf(s.z[k, d])
        total += stats.norm(s.nu[k], 0.3).logpdf(s.varphi[k]).sum() + stats.norm(0, 2.0).logpdf(s.nu[k])
    assert log_joint(spec, s, data) == pytest.approx(total, abs=1e-10)


def test_log_joint_highdim_likelihood(rng):
    N, D = 4, 4
    data = _data(rng, N, D)
    spec = ModelSpec(K=1, D=D)
    s = ParameterState(rng.standard_normal((1, D, N)), rng.normal(0, 1, (1, N)), [0.0], np.zeros(N))
    rho = np.exp(s.varphi[0])
    m = s.z[0] / np.linalg.norm(s.z[0], axis=0)
    ref = rho * np.einsum("dn,nd->n", m, data.obs) + (D / 2 - 1) * np.log(rho) \
        - D / 2 * np.log(2 * np.pi) - np.log(special.iv(D / 2 - 1, rho))
    np.testing.assert_allclose(component_loglik(s, data)[0], ref, rtol=1e-12)


def test_label_symmetry(rng):
    data = _data(rng, 6, 2)
    spec = ModelSpec(K=2, D=2, gp_means=np.zeros((2, 2)))
    s = ParameterState(rng.standard_normal((2, 2, 6)), rng.normal(0, 1, (2, 6)), [0.3, -0.2],
                       rng.integers(0, 2, 6))
    t = ParameterState(s.z[::-1], s.varphi[::-1], s.nu[::-1], 1 - s.zeta)
    assert log_joint(spec, s, data) == pytest.approx(log_joint(spec, t, data), rel=1e-14)


def test_spec_validation():
    with pytest.raises(ValueError):
        ModelSpec(K=2, D=2, lam=[0.5, 0.6])
    with pytest.raises(ValueError):
        ModelSpec(K=1, D=2, gp_means=np.zeros((1, 3)))
    with pytest.raises(ValueError):
        ModelSpec(K=1, D=2, varsigma=0.0)


def test_prepare_dataset_drops():
    locs = np.array([[0.2, 0.3, 0.5], [0.2, 0.3, 0.5], [0.1, 0.1, 0.8], [0.3, 0.3, 0.4]])
    dirs = np.array([1.0, 1.0, 2.0, 0.0])
    data, counts = prepare_dataset(locs, dirs, degenerate=[False, False, False, True])
    assert counts == {"degenerate": 1, "duplicate": 1}
    assert data.N == 2
    np.testing.assert_allclose(data.angles, [1.0, 2.0])
