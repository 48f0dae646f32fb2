"""SvM / SvM-c model containers and the log joint density.

Observations are stored as unit vectors in R^D: (cos y, sin y) on the circle
and the spherical-transform image of the direction angles for D > 2. With that
convention a single likelihood covers both regimes,

    log f(y | z, rho) = rho * (z / |z|)^T y + log C_D(rho).
"""
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .geometry import arctan_star, as_simplex_point, direction_to_unit, unit_to_direction
from .gp import KernelConfig, build_covariance

log = logging.getLogger(__name__)
LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class ModelSpec:
    """K components over directions in R^D (D = 2 is the circular model).

    ``gp_means`` has shape (K, D) of constants or (K, D, N) of per-location
    prior means. ``kernel`` is shared unless ``kernels`` lists one per
    component.
    """
    K: int
    D: int
    kernel: KernelConfig = field(default_factory=KernelConfig)
    gp_means: np.ndarray = None
    varsigma: float = 0.05
    tau: float = 5.0
    lam: np.ndarray = None
    kernels: tuple = None

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if self.D < 2:
            raise ValueError("D must be at least 2")
        if self.varsigma <= 0 or self.tau <= 0:
            raise ValueError("varsigma and tau must be positive")
        mu = np.zeros((self.K, self.D)) if self.gp_means is None else np.asarray(self.gp_means, float)
        if mu.shape[:2] != (self.K, self.D):
            raise ValueError(f"gp_means must start with shape ({self.K}, {self.D}), got {mu.shape}")
        lam = np.full(self.K, 1.0 / self.K) if self.lam is None else np.asarray(self.lam, float)
        if lam.shape != (self.K,) or np.any(lam < 0) or abs(lam.sum() - 1.0) > 1e-9:
            raise ValueError("lam must be K nonnegative weights summing to 1")
        if self.kernels is not None and len(self.kernels) != self.K:
            raise ValueError("kernels must list one config per component")
        object.__setattr__(self, "gp_means", mu)
        object.__setattr__(self, "lam", lam / lam.sum())

    def kernel_for(self, k):
        return self.kernel if self.kernels is None else self.kernels[k]

    def mean_surface(self, k, d, n):
        mu = self.gp_means[k, d]
        return np.broadcast_to(mu, (n,)) if np.ndim(mu) == 0 else np.asarray(mu)

    def with_lam(self, lam):
        return replace(self, lam=np.asarray(lam, float))


@dataclass
class ParameterState:
    """One latent state. Labels are 0-based internally."""
    z: np.ndarray        # (K, D, N)
    varphi: np.ndarray   # (K, N)
    nu: np.ndarray       # (K,)
    zeta: np.ndarray     # (N,) int

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        self.varphi = np.asarray(self.varphi, dtype=float)
        self.nu = np.asarray(self.nu, dtype=float).reshape(-1)
        self.zeta = np.asarray(self.zeta, dtype=np.int64)
        K, _, N = self.z.shape
        if self.varphi.shape != (K, N) or self.nu.shape != (K,) or self.zeta.shape != (N,):
            raise ValueError("inconsistent ParameterState shapes")

    @property
    def K(self):
        return self.z.shape[0]

    @property
    def N(self):
        return self.z.shape[2]

    @property
    def rho(self):
        return np.exp(self.varphi)

    @property
    def m(self):
        """Mean angles (K, N) for D = 2, unit mean directions (K, N, D) otherwise."""
        if self.z.shape[1] == 2:
            return arctan_star(self.z[:, 0], self.z[:, 1])
        nrm = np.linalg.norm(self.z, axis=1, keepdims=True)
        return np.moveaxis(self.z / nrm, 1, 2)

    def copy(self):
        return ParameterState(self.z.copy(), self.varphi.copy(), self.nu.copy(), self.zeta.copy())


def mean_direction(state, k, loc):
    z = state.z[k, :, loc]
    if z.shape[0] == 2:
        return arctan_star(z[0], z[1])
    nrm = np.linalg.norm(z)
    if nrm == 0.0:
        raise ValueError("mean direction undefined for a zero GP vector")
    return z / nrm


@dataclass(frozen=True)
class Dataset:
    """Start locations (N, D+1) and unit observations (N, D)."""
    locations: np.ndarray
    obs: np.ndarray
    degenerate_mask: np.ndarray = None

    def __post_init__(self):
        loc = np.atleast_2d(np.asarray(self.locations, dtype=float))
        obs = np.atleast_2d(np.asarray(self.obs, dtype=float))
        if loc.shape[0] != obs.shape[0]:
            raise ValueError(f"{loc.shape[0]} locations but {obs.shape[0]} observations")
        if obs.shape[1] != loc.shape[1] - 1:
            raise ValueError("observations must live in R^D for locations on the D-simplex")
        mask = np.zeros(loc.shape[0], bool) if self.degenerate_mask is None else np.asarray(self.degenerate_mask, bool)
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "obs", obs)
        object.__setattr__(self, "degenerate_mask", mask)

    @property
    def N(self):
        return self.obs.shape[0]

    @property
    def D(self):
        return self.obs.shape[1]

    @property
    def angles(self):
        """Direction angles: (N,) for D = 2, (N, D-1) otherwise."""
        a = unit_to_direction(self.obs)
        return a[:, 0] if self.D == 2 else a

    def subset(self, idx):
        idx = np.asarray(idx)
        if idx.dtype != bool:
            idx = idx.astype(np.intp)
        return Dataset(self.locations[idx], self.obs[idx], self.degenerate_mask[idx])

    @classmethod
    def from_directions(cls, locations, directions, degenerate=None):
        locations = np.atleast_2d(np.asarray(locations, dtype=float))
        dim = locations.shape[1] - 1
        d = np.asarray(directions, dtype=float)
        if dim == 2:
            d = d.reshape(-1)
        return cls(locations, direction_to_unit(d, dim), degenerate)


def prepare_dataset(locations, directions, degenerate=None):
    """Validate, drop degenerate moves and duplicated (location, direction) pairs.

    Returns the cleaned Dataset and a dict of dropped counts.
    """
    locations = np.atleast_2d(np.asarray(locations, dtype=float))
    locations = np.array([as_simplex_point(x) for x in locations])
    data = Dataset.from_directions(locations, directions, degenerate)
    keep = ~data.degenerate_mask
    n_degenerate = int((~keep).sum())
    seen = set()
    n_dup = 0
    for i in range(data.N):
        if not keep[i]:
            continue
        key = tuple(np.round(np.concatenate([data.locations[i], data.obs[i]]), 12))
        if key in seen:
            keep[i] = False
            n_dup += 1
        else:
            seen.add(key)
    if n_degenerate or n_dup:
        log.info("dropped %d degenerate and %d duplicate observations", n_degenerate, n_dup)
    out = data.subset(np.flatnonzero(keep))
    return Dataset(out.locations, out.obs), {"degenerate": n_degenerate, "duplicate": n_dup}


def component_factors(spec, locations):
    """Covariance factors per component, shared when the kernel is shared."""
    if spec.kernels is None:
        f = build_covariance(spec.kernel, locations)
        return [f] * spec.K
    cache = {}
    out = []
    for k in range(spec.K):
        cfg = spec.kernel_for(k)
        if cfg not in cache:
            cache[cfg] = build_covariance(cfg, locations)
        out.append(cache[cfg])
    return out


def gp_mean_array(spec, n):
    """Prior means broadcast to (K, D, N)."""
    mu = spec.gp_means
    if mu.ndim == 2:
        return np.broadcast_to(mu[:, :, None], (spec.K, spec.D, n)).copy()
    return np.asarray(mu, float).copy()


def alignments(state, data):
    """(K, N) inner products of projected means with observations."""
    return np.stack([kernels.alignment(state.z[k], data.obs) for k in range(state.K)])


def component_loglik(state, data):
    """(K, N) log f(y_l | m_kl, rho_kl) for every component."""
    rho = state.rho
    norm = kernels.log_norm_const(data.D, rho.reshape(-1)).reshape(rho.shape)
    return rho * alignments(state, data) + norm


def _check(spec, state, data):
    if state.z.shape != (spec.K, spec.D, data.N):
        raise ValueError(f"state z has shape {state.z.shape}, expected {(spec.K, spec.D, data.N)}")
    if data.D != spec.D:
        raise ValueError("dataset and spec disagree on D")


def log_joint(spec, state, data, factors=None):
    """Log joint density of (y, z, varphi, nu, zeta) in the centred form."""
    _check(spec, state, data)
    if factors is None:
        factors = component_factors(spec, data.locations)
    ll = component_loglik(state, data)
    n = np.arange(data.N)
    total = ll[state.zeta, n].sum()
    with np.errstate(divide="ignore"):
        total += np.log(spec.lam)[state.zeta].sum()
    mu = gp_mean_array(spec, data.N)
    for k in range(spec.K):
        total += factors[k].log_prior(state.z[k], mu[k]).sum()
    s2, t2 = spec.varsigma ** 2, spec.tau ** 2
    dev = state.varphi - state.nu[:, None]
    total += np.sum(-0.5 * dev * dev / s2 - 0.5 * np.log(2 * np.pi * s2))
    total += np.sum(-0.5 * state.nu ** 2 / t2 - 0.5 * np.log(2 * np.pi * t2))
    return float(total)


def prior_state(spec, data, rng, factors=None):
    """Cold start: z from the GP prior, varphi = nu = 0, labels from lam."""
    if factors is None:
        factors = component_factors(spec, data.locations)
    mu = gp_mean_array(spec, data.N)
    z = np.empty((spec.K, spec.D, data.N))
    for k in range(spec.K):
        for d in range(spec.D):
            z[k, d] = mu[k, d] + factors[k].lower_cholesky @ rng.standard_normal(data.N)
    zeta = rng.choice(spec.K, size=data.N, p=spec.lam) if spec.K > 1 else np.zeros(data.N, int)
    return ParameterState(z, np.zeros((spec.K, data.N)), np.zeros(spec.K), zeta)
