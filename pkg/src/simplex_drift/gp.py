"""Gaussian-process kernels and covariance algebra over simplex locations."""
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

JITTER_START = 1e-8
JITTER_MAX = 1e-4


@dataclass(frozen=True)
class KernelConfig:
    """Squared exponential or Matern kernel on raw simplex coordinates.

    ``sigma`` is the SE amplitude. The Matern forms carry no amplitude by
    default; ``amplitude`` multiplies them when set (an extension).
    """
    family: Literal["squared_exponential", "matern"] = "squared_exponential"
    sigma: float = 0.5
    omega: float = 0.5
    nu: float = 1.5
    amplitude: float = 1.0

    def __post_init__(self):
        if self.family not in ("squared_exponential", "matern"):
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.sigma <= 0 or self.omega <= 0 or self.amplitude <= 0:
            raise ValueError("kernel hyperparameters must be positive")
        if self.family == "matern" and self.nu not in (1.5, 2.5):
            raise ValueError("Matern smoothness must be 3/2 or 5/2")

    @property
    def variance(self):
        return self.sigma ** 2 if self.family == "squared_exponential" else self.amplitude


def _sq_dist(a, b):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[1] != b.shape[1]:
        raise ValueError("locations differ in dimension")
    # explicit differences keep x1 = x2 at exactly zero distance
    if a.shape[0] * b.shape[0] <= 250_000:
        diff = a[:, None, :] - b[None, :, :]
        return np.einsum("ijk,ijk->ij", diff, diff)
    d2 = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    return np.maximum(d2, 0.0)


def _from_sq_dist(config, d2):
    if config.family == "squared_exponential":
        return config.sigma ** 2 * np.exp(-0.5 * d2 / config.omega ** 2)
    r = np.sqrt(d2) / config.omega
    if config.nu == 1.5:
        s = np.sqrt(3.0) * r
        return config.amplitude * (1.0 + s) * np.exp(-s)
    s = np.sqrt(5.0) * r
    return config.amplitude * (1.0 + s + s * s / 3.0) * np.exp(-s)


def kernel_matrix(config, a, b):
    return _from_sq_dist(config, _sq_dist(a, b))


def kernel_eval(config, x1, x2):
    return float(kernel_matrix(config, x1, x2)[0, 0])


@dataclass(frozen=True)
class CovarianceFactor:
    matrix: np.ndarray
    lower_cholesky: np.ndarray
    jitter: float

    @property
    def n(self):
        return self.matrix.shape[0]

    def solve(self, b):
        return cho_solve((self.lower_cholesky, True), b)

    def whiten(self, v):
        """L^{-1} v."""
        return solve_triangular(self.lower_cholesky, v, lower=True)

    def log_det(self):
        return 2.0 * np.log(np.diag(self.lower_cholesky)).sum()

    def log_prior(self, values, mean):
        """Gaussian log-density of ``values`` (..., N) under N(mean, Sigma + jitter I)."""
        w = self.whiten(np.atleast_2d(values - mean).T)
        quad = (w * w).sum(0)
        out = -0.5 * quad - 0.5 * self.log_det() - 0.5 * self.n * np.log(2.0 * np.pi)
        return out if np.ndim(values) > 1 else float(out[0])


def _duplicates(locations):
    seen, dup = {}, []
    for i, row in enumerate(np.asarray(locations)):
        key = tuple(np.round(row, 12))
        if key in seen:
            dup.append((seen[key], i))
        else:
            seen[key] = i
    return dup


def factorize(matrix, locations=None, jitter_start=JITTER_START, jitter_max=JITTER_MAX):
    """Cholesky with a doubling jitter ladder."""
    matrix = 0.5 * (matrix + matrix.T)
    n = matrix.shape[0]
    jitter = jitter_start
    while jitter <= jitter_max * (1 + 1e-12):
        try:
            chol = np.linalg.cholesky(matrix + jitter * np.eye(n))
            return CovarianceFactor(matrix, chol, jitter)
        except np.linalg.LinAlgError:
            jitter *= 2.0
    msg = f"covariance not positive definite even with jitter {jitter_max:g}"
    if locations is not None:
        dup = _duplicates(locations)
        if dup:
            msg += f"; duplicated locations at index pairs {dup[:10]}"
    raise np.linalg.LinAlgError(msg)


def build_covariance(config, locations):
    locations = np.atleast_2d(np.asarray(locations, dtype=float))
    if locations.shape[0] < 1:
        raise ValueError("need at least one location")
    return factorize(kernel_matrix(config, locations, locations), locations)


def gp_prior_draw(factor, mean, rng, size=None):
    """mean + L eps; with ``size`` returns (size, N)."""
    mean = np.asarray(mean, dtype=float)
    if size is None:
        return mean + factor.lower_cholesky @ rng.standard_normal(factor.n)
    eps = rng.standard_normal((size, factor.n))
    return mean + eps @ factor.lower_cholesky.T


def conditional_gaussian(config, train_locs, test_locs, train_mean, test_mean, train_values,
                         factor=None):
    """Mean and covariance of GP values at ``test_locs`` given ``train_values``.

    Pass a precomputed training ``factor`` to skip refactorizing; the returned
    covariance is symmetrized with the training jitter added.
    """
    train_locs = np.atleast_2d(np.asarray(train_locs, dtype=float))
    test_locs = np.atleast_2d(np.asarray(test_locs, dtype=float))
    if factor is None:
        factor = build_covariance(config, train_locs)
    cross = kernel_matrix(config, train_locs, test_locs)
    resid = np.asarray(train_values, dtype=float) - train_mean
    mean = test_mean + cross.T @ factor.solve(resid)
    w = factor.whiten(cross)
    cov = kernel_matrix(config, test_locs, test_locs) - w.T @ w
    cov = 0.5 * (cov + cov.T) + factor.jitter * np.eye(cov.shape[0])
    return mean, cov
