"""Simulation scenarios iV, iVM, SvM and SvM-c on the 2-simplex and higher.

Locations are uniform on the simplex. Homogeneous scenarios draw directions
from fixed von Mises(-Fisher) laws; spatial scenarios draw GP surfaces over
train and test locations jointly, project them to mean directions and draw
concentrations rho = exp(varphi) with varphi ~ N(nu, varsigma^2).
"""
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .distributions import vm_sample, vmf_sample
from .geometry import arctan_star, reconstruct_endpoint
from .gp import KernelConfig, build_covariance
from .model import Dataset
from .selection import mixture_log_density

SCENARIOS = ("iV", "iVM", "SvM", "SvM-c")


def _defaults(scenario, D):
    """Scenario settings used in the simulation study."""
    if D == 2:
        return {
            "iV": dict(means=[np.pi], concentrations=[5.0], mix=[1.0]),
            "iVM": dict(means=[np.pi / 2, 3 * np.pi / 2], concentrations=[5.0, 10.0], mix=[0.3, 0.7]),
            "SvM": dict(gp_means=[[-1.0, 0.0]], concentrations=[3.0], mix=[1.0],
                        sigma=0.5, omega=0.2),
            "SvM-c": dict(gp_means=[[0.0, 1.0], [0.0, -1.0]], concentrations=[3.0, 8.0],
                          mix=[0.5, 0.5], sigma=0.5, omega=0.2),
        }[scenario]
    a = np.array([1.0, 1.0, -1.0, -1.0, -1.0])
    if D != 5:
        a = np.where(np.arange(D) < D // 2, 1.0, -1.0)
    ones = np.ones(D)
    return {
        "iV": dict(means=[ones / np.sqrt(D)], concentrations=[5.0], mix=[1.0]),
        "iVM": dict(means=[a / np.sqrt(D), -a / np.sqrt(D)], concentrations=[8.0, 3.0], mix=[0.7, 0.3]),
        "SvM": dict(gp_means=[ones], concentrations=[5.0], mix=[1.0], sigma=0.5, omega=0.1),
        "SvM-c": dict(gp_means=[a, -a], concentrations=[8.0, 3.0], mix=[0.7, 0.3],
                      sigma=0.5, omega=0.1),
    }[scenario]


@dataclass
class ScenarioConfig:
    """``D`` is the simplex dimension; directions live in R^D.

    Unset fields take the scenario defaults. ``concentrations`` are the
    generating rho (homogeneous) or exp(nu) (spatial); ``mean_angle`` shifts
    the 2D SvM prior mean, e.g. 0 for the wraparound case.
    """
    scenario: str = "SvM"
    D: int = 2
    n_train: int = 200
    n_test: int = 30
    means: Optional[list] = None
    concentrations: Optional[list] = None
    mix: Optional[list] = None
    gp_means: Optional[list] = None
    mean_angle: Optional[float] = None
    sigma: Optional[float] = None
    omega: Optional[float] = None
    varsigma: float = 0.05
    theta2: float = 0.1
    seed: int = 0
    resolved: dict = field(default=None, repr=False)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        if self.D < 2:
            raise ValueError("D must be at least 2")
        if self.n_train < 1 or self.n_test < 0:
            raise ValueError("n_train must be positive and n_test nonnegative")
        p = _defaults(self.scenario, self.D)
        for key in ("means", "concentrations", "mix", "gp_means", "sigma", "omega"):
            if getattr(self, key) is not None:
                p[key] = getattr(self, key)
        if self.mean_angle is not None and self.scenario == "SvM" and self.D == 2:
            p["gp_means"] = [[np.cos(self.mean_angle), np.sin(self.mean_angle)]]
        mix = np.asarray(p["mix"], float)
        if np.any(mix < 0) or abs(mix.sum() - 1.0) > 1e-9:
            raise ValueError("mixing probabilities must lie on the simplex")
        if np.any(np.asarray(p["concentrations"], float) < 0):
            raise ValueError("concentrations must be nonnegative")
        self.resolved = p

    def to_dict(self):
        d = asdict(self)
        d.pop("resolved")
        return d


@dataclass
class GroundTruth:
    scenario: str
    D: int
    labels: np.ndarray          # (N,) 0-based components
    mean_units: np.ndarray      # (K, N, D) generating mean directions
    rho: np.ndarray             # (K, N)
    mix: np.ndarray
    z: np.ndarray = None        # (K, D, N) GP draws, spatial scenarios only
    nu: np.ndarray = None

    @property
    def mean_angles(self):
        """(K, N) generating mean angles for D = 2."""
        return arctan_star(self.mean_units[..., 0], self.mean_units[..., 1])

    def subset(self, idx):
        return GroundTruth(self.scenario, self.D, self.labels[idx], self.mean_units[:, idx],
                           self.rho[:, idx], self.mix,
                           None if self.z is None else self.z[:, :, idx], self.nu)

    def log_likelihood(self, obs):
        """Exact generative log-likelihood of unit observations under the truth."""
        K = self.mean_units.shape[0]
        # conditional on labels: each observation under its own component
        total = 0.0
        for k in range(K):
            rows = self.labels == k
            if rows.any():
                total += mixture_log_density(np.ones(1), self.mean_units[k:k + 1, rows],
                                             self.rho[k:k + 1, rows], obs[rows]).sum()
        return float(total)


def sample_simplex_uniform(D, n, rng):
    """n points uniform on the D-simplex, shape (n, D + 1)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return rng.dirichlet(np.ones(D + 1), size=n)


def _draw_direction(mean_unit, rho, rng):
    if mean_unit.shape[0] == 2:
        m = arctan_star(mean_unit[0], mean_unit[1])
        y = vm_sample(m, rho, rng)
        return np.array([np.cos(y), np.sin(y)])
    return vmf_sample(mean_unit, rho, rng)


def generate(config, rng=None):
    """Simulate (train Dataset, test Dataset, (train truth, test truth))."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    p = config.resolved
    D = config.D
    n = config.n_train + config.n_test
    locs = sample_simplex_uniform(D, n, rng)
    mix = np.asarray(p["mix"], float)
    K = mix.shape[0]
    labels = rng.choice(K, size=n, p=mix) if K > 1 else np.zeros(n, np.int64)
    conc = np.asarray(p["concentrations"], float)
    z = nu = None
    if config.scenario in ("iV", "iVM"):
        raw = p["means"]
        if D == 2:
            means = np.array([[np.cos(a), np.sin(a)] for a in raw])
        else:
            means = np.asarray(raw, float)
            means = means / np.linalg.norm(means, axis=1, keepdims=True)
        units = np.broadcast_to(means[:, None, :], (K, n, D)).copy()
        rho = np.broadcast_to(conc[:, None], (K, n)).copy()
    else:
        gp_means = np.asarray(p["gp_means"], float)
        factor = build_covariance(KernelConfig(sigma=p["sigma"], omega=p["omega"]), locs)
        z = np.empty((K, D, n))
        for k in range(K):
            for d in range(D):
                z[k, d] = gp_means[k, d] + factor.lower_cholesky @ rng.standard_normal(n)
        units = np.moveaxis(z / np.linalg.norm(z, axis=1, keepdims=True), 1, 2)
        nu = np.log(np.maximum(conc, 1e-300))
        rho = np.exp(nu[:, None] + config.varsigma * rng.standard_normal((K, n)))
    obs = np.array([_draw_direction(units[labels[i], i], rho[labels[i], i], rng) for i in range(n)])
    truth = GroundTruth(config.scenario, D, labels, units, rho, mix, z, nu)
    tr = np.arange(config.n_train)
    te = np.arange(config.n_train, n)
    return (Dataset(locs[tr], obs[tr]), Dataset(locs[te], obs[te]),
            (truth.subset(tr), truth.subset(te)))


def endpoints(data, theta2):
    """Next-period proportions for simulated directions at a fixed move size."""
    angles = data.angles
    out = np.empty_like(data.locations)
    for i in range(data.N):
        y = np.atleast_1d(angles[i])
        out[i] = reconstruct_endpoint(data.locations[i], theta2, y)
    return out
