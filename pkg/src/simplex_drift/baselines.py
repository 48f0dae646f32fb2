"""Homogeneous von Mises(-Fisher) models iV (K = 1) and iVM (K > 1).

Means and concentrations are shared by every location. Each component mean is
a projected normal w_k ~ N(mu_k, s^2 I) with m_k = w_k / |w_k|, and the
log-concentration has a N(0, tau^2) prior. The sampler draws labels, moves
each w_k by elliptical slice sampling, each log-concentration by univariate
slice sampling, and lam from its Dirichlet(1 + counts) conditional.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .sampler import _ess


@dataclass(frozen=True)
class HomogeneousSpec:
    K: int
    D: int
    prior_mean: np.ndarray = None   # (K, D); zeros give a uniform direction prior
    prior_scale: float = 1.0
    tau: float = 5.0

    def __post_init__(self):
        mu = np.zeros((self.K, self.D)) if self.prior_mean is None else np.asarray(self.prior_mean, float)
        if mu.shape != (self.K, self.D):
            raise ValueError(f"prior_mean must have shape ({self.K}, {self.D})")
        object.__setattr__(self, "prior_mean", mu)


@dataclass
class HomogeneousChain:
    w: np.ndarray       # (S, K, D)
    varphi: np.ndarray  # (S, K)
    lam: np.ndarray     # (S, K)
    zeta: np.ndarray    # (S, N)

    def __len__(self):
        return self.w.shape[0]

    @property
    def means(self):
        return self.w / np.linalg.norm(self.w, axis=-1, keepdims=True)


def _loglik_matrix(w, varphi, y):
    m = w / np.linalg.norm(w, axis=1, keepdims=True)
    rho = np.exp(varphi)
    norm = kernels.log_norm_const(y.shape[1], rho)
    return rho[:, None] * (m @ y.T) + norm[:, None]


def _slice_1d(x0, logf, rng, width=1.0, max_steps=50):
    """Univariate slice sampler with stepping out and shrinkage."""
    log_y = logf(x0) + np.log(rng.random())
    lo = x0 - width * rng.random()
    hi = lo + width
    j = int(rng.integers(max_steps))
    k = max_steps - 1 - j
    while j > 0 and logf(lo) > log_y:
        lo -= width
        j -= 1
    while k > 0 and logf(hi) > log_y:
        hi += width
        k -= 1
    for _ in range(1000):
        x = rng.uniform(lo, hi)
        if logf(x) > log_y:
            return x
        if x < x0:
            lo = x
        else:
            hi = x
    raise RuntimeError("slice sampler failed to terminate")


def _init_means(spec, y, rng):
    # spherical k-means style start: random observations, a few refinements
    idx = rng.choice(y.shape[0], size=spec.K, replace=False)
    m = y[idx].copy()
    for _ in range(10):
        lab = np.argmax(m @ y.T, axis=0)
        for k in range(spec.K):
            s = y[lab == k].sum(axis=0)
            if np.linalg.norm(s) > 0:
                m[k] = s / np.linalg.norm(s)
    return m


def fit_homogeneous(spec, obs, iterations=2000, burn_in=1000, thin=5, rng=None):
    """MCMC for iV / iVM on unit observations ``obs`` (N, D)."""
    rng = np.random.default_rng(0) if rng is None else rng
    y = np.asarray(obs, dtype=float)
    n = y.shape[0]
    K = spec.K
    w = _init_means(spec, y, rng)
    varphi = np.zeros(K)
    lam = np.full(K, 1.0 / K)
    zeta = np.argmax(w @ y.T, axis=0) if K > 1 else np.zeros(n, np.int64)
    S = (iterations - burn_in) // thin
    out = HomogeneousChain(np.empty((S, K, spec.D)), np.empty((S, K)), np.empty((S, K)),
                           np.empty((S, n), np.int64))
    s2 = spec.prior_scale
    j = 0
    for it in range(1, iterations + 1):
        if K > 1:
            lp = np.log(lam)[:, None] + _loglik_matrix(w, varphi, y)
            p = np.exp(lp - lp.max(axis=0))
            p /= p.sum(axis=0)
            u = rng.random(n)
            zeta = np.minimum((u[None, :] > np.cumsum(p, axis=0)).sum(axis=0), K - 1)
        for k in range(K):
            yk = y[zeta == k]
            rho = np.exp(varphi[k])

            def loglik(f, yk=yk, rho=rho, k=k):
                v = f + spec.prior_mean[k]
                return rho * float(np.sum(yk @ v)) / np.linalg.norm(v)

            f, _ = _ess(w[k] - spec.prior_mean[k], s2 * rng.standard_normal(spec.D), loglik, rng)
            w[k] = f + spec.prior_mean[k]
            a = yk @ (w[k] / np.linalg.norm(w[k]))
            ones = np.ones(a.shape[0])

            def logf(phi, a=a, ones=ones):
                t, _ = kernels.concentration_terms(spec.D, np.full(a.shape[0], np.exp(phi)), a, ones)
                return t - 0.5 * phi * phi / spec.tau ** 2

            varphi[k] = _slice_1d(varphi[k], logf, rng)
        if K > 1:
            lam = rng.dirichlet(1.0 + np.bincount(zeta, minlength=K))
        if it > burn_in and (it - burn_in) % thin == 0 and j < S:
            out.w[j], out.varphi[j], out.lam[j], out.zeta[j] = w, varphi, lam, zeta
            j += 1
    return out


class HomogeneousFit:
    """Predictive interface shared with the spatial fits."""

    def __init__(self, spec, chain):
        self.spec = spec
        self.chain = chain

    def __len__(self):
        return len(self.chain)

    def predictive_params(self, i, held_locations, rng):
        n = np.atleast_2d(held_locations).shape[0]
        m = self.chain.means[i]
        units = np.broadcast_to(m[:, None, :], (self.spec.K, n, self.spec.D))
        rho = np.broadcast_to(np.exp(self.chain.varphi[i])[:, None], (self.spec.K, n))
        return self.chain.lam[i], units, rho
