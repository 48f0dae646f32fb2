"""Log posterior-predictive probability on withheld locations.

For posterior draw i and replicate m the predictive parameters at the held
locations are drawn (conditional GP values, projected means, phi* ~ N(nu,
varsigma^2)) and

    p*_{i,m} = prod_n sum_k lam_k f(y*_n | m*_kn, rho*_kn).

The score is log[(1/M) sum_m (1/I) sum_i p*_{i,m}]: posterior draws are
averaged first, replicates second, all in log space.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import kernels
from .gp import factorize, kernel_matrix
from .model import component_factors, gp_mean_array


@dataclass(frozen=True)
class PredictiveReport:
    log_predictive: float
    per_point_log: np.ndarray
    M: int
    I: int
    log_replicates: np.ndarray = None   # (M,) log of the posterior average per replicate

    def __post_init__(self):
        if not np.isfinite(self.log_predictive):
            raise FloatingPointError("log predictive is not finite")


class SpatialFit:
    """Predictive draws for SvM / SvM-c from a posterior chain."""

    def __init__(self, spec, chain, train, factors=None):
        self.spec = spec
        self.chain = chain
        self.train = train
        self.factors = component_factors(spec, train.locations) if factors is None else factors
        self._cache = {}

    def __len__(self):
        return len(self.chain)

    def _operator(self, k, held_locations):
        key = (k, held_locations.tobytes())
        if key not in self._cache:
            cfg = self.spec.kernel_for(k)
            f = self.factors[k]
            cross = kernel_matrix(cfg, self.train.locations, held_locations)
            weights = f.solve(cross).T                     # (N*, N)
            w = f.whiten(cross)
            cov = kernel_matrix(cfg, held_locations, held_locations) - w.T @ w
            chol = factorize(0.5 * (cov + cov.T), jitter_start=max(f.jitter, 1e-10)).lower_cholesky
            self._cache[key] = (weights, chol)
        return self._cache[key]

    def predictive_params(self, i, held_locations, rng):
        """(lam, unit means (K, N*, D), rho (K, N*)) for one replicate of draw i.

        Draw order is fixed: z* for each component and coordinate, then phi*
        for each component.
        """
        spec = self.spec
        held_locations = np.atleast_2d(held_locations)
        n_star = held_locations.shape[0]
        mu_train = gp_mean_array(spec, self.train.N)
        mu_held = np.broadcast_to(spec.gp_means[:, :, None], (spec.K, spec.D, n_star)) \
            if spec.gp_means.ndim == 2 else spec.gp_means
        z = np.empty((spec.K, spec.D, n_star))
        for k in range(spec.K):
            weights, chol = self._operator(k, held_locations)
            for d in range(spec.D):
                mean = mu_held[k, d] + weights @ (self.chain.z[i, k, d] - mu_train[k, d])
                z[k, d] = mean + chol @ rng.standard_normal(n_star)
        phi = np.empty((spec.K, n_star))
        for k in range(spec.K):
            phi[k] = self.chain.nu[i, k] + spec.varsigma * rng.standard_normal(n_star)
        units = np.moveaxis(z / np.linalg.norm(z, axis=1, keepdims=True), 1, 2)
        return self.chain.lam[i], units, np.exp(phi)


def mixture_log_density(lam, units, rho, obs):
    """(N*,) log sum_k lam_k f(y_n | m_kn, rho_kn)."""
    K, n, D = units.shape
    align = np.einsum("knd,nd->kn", units, obs)
    norm = kernels.log_norm_const(D, np.ascontiguousarray(rho).reshape(-1)).reshape(K, n)
    with np.errstate(divide="ignore"):
        lp = np.log(lam)[:, None] + rho * align + norm
    return logsumexp(lp, axis=0)


def predictive_from_fit(fit, held, M=100, rng=None, draws=None):
    """Posterior-predictive report for any fit exposing ``predictive_params``."""
    if held.N == 0:
        raise ValueError("held-out set is empty")
    if M < 1:
        raise ValueError("M must be at least 1")
    rng = np.random.default_rng(0) if rng is None else rng
    idx = np.arange(len(fit)) if draws is None else np.asarray(draws)
    if idx.size == 0:
        raise ValueError("posterior chain is empty")
    I = idx.size
    point = np.empty((I, M, held.N))
    for a, i in enumerate(idx):
        for m in range(M):
            lam, units, rho = fit.predictive_params(i, held.locations, rng)
            point[a, m] = mixture_log_density(lam, units, rho, held.obs)
    joint = point.sum(axis=2)                               # log p*_{i,m}
    per_rep = logsumexp(joint, axis=0) - np.log(I)          # average over posterior draws
    total = float(logsumexp(per_rep) - np.log(M))           # then over replicates
    per_point = logsumexp(point.reshape(I * M, held.N), axis=0) - np.log(I * M)
    return PredictiveReport(total, per_point, M, I, per_rep)


def posterior_predictive(spec, chain, train, held, M=100, rng=None, factors=None):
    return predictive_from_fit(SpatialFit(spec, chain, train, factors), held, M, rng)


def select_model(reports):
    """Label with the highest log predictive; ties go to the earlier label."""
    reports = list(reports)
    if not reports:
        raise ValueError("no candidate reports")
    best_label, best = reports[0][0], reports[0][1].log_predictive
    for label, rep in reports[1:]:
        if rep.log_predictive > best:
            best_label, best = label, rep.log_predictive
    return best_label
