"""Posterior summaries: circular means and intervals, Gaussian credible regions
for direction angles, split R-hat and recovery scoring against simulations."""
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np
from scipy.stats import chi2

from .geometry import TWO_PI, arctan_star, unit_to_direction

RESULTANT_TOL = 1e-12


class UndefinedMeanError(ValueError):
    pass


@dataclass(frozen=True)
class CircularSummary:
    mean: float
    resultant_length: float
    ci_low: float
    ci_high: float


def _resultant(angles, axis=None):
    a = np.asarray(angles, dtype=float)
    c = np.cos(a).mean(axis=axis)
    s = np.sin(a).mean(axis=axis)
    return c, s, np.hypot(c, s)


def circular_mean(angles, axis=None):
    """Direction of the mean resultant vector, in [0, 2 pi)."""
    a = np.asarray(angles, dtype=float)
    if a.size == 0:
        raise ValueError("circular_mean of an empty set")
    c, s, r = _resultant(a, axis)
    if np.any(r < RESULTANT_TOL):
        raise UndefinedMeanError("mean direction undefined: resultant length is zero")
    return arctan_star(c, s)


def circular_distance(a, b):
    d = np.abs(np.mod(np.asarray(a) - np.asarray(b), TWO_PI))
    return np.minimum(d, TWO_PI - d)


def _recenter(angles, center):
    # map into (center - pi, center + pi]
    d = np.asarray(angles, dtype=float) - center
    return center + (np.pi - np.mod(np.pi - d, TWO_PI))


def circular_interval(draws, level=0.95):
    """Central interval after recentering the draws around their circular mean."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    mu = circular_mean(draws)
    x = _recenter(draws, mu)
    lo, hi = np.quantile(x, [(1 - level) / 2, (1 + level) / 2])
    return float(np.mod(lo, TWO_PI)), float(np.mod(hi, TWO_PI))


def in_circular_interval(angle, low, high):
    """Membership for an interval running counter-clockwise from low to high."""
    width = np.mod(high - low, TWO_PI)
    return np.mod(np.asarray(angle) - low, TWO_PI) <= width + 1e-12


def circular_summary(draws, level=0.95):
    c, s, r = _resultant(draws)
    lo, hi = circular_interval(draws, level)
    return CircularSummary(float(arctan_star(c, s)), float(min(r, 1.0)), lo, hi)


@dataclass(frozen=True)
class CredibleRegion:
    """Gaussian ellipsoid for direction angles; the last angle is circular."""
    mean: np.ndarray
    cov: np.ndarray
    radius2: float

    def _shift(self, angles):
        a = np.array(angles, dtype=float, copy=True)
        a[..., -1] = _recenter(a[..., -1], self.mean[-1])
        return a

    def mahalanobis2(self, angles):
        d = self._shift(angles) - self.mean
        sol = np.linalg.solve(self.cov, d.T).T if d.ndim > 1 else np.linalg.solve(self.cov, d)
        return np.sum(d * sol, axis=-1)

    def contains(self, angles):
        return self.mahalanobis2(angles) <= self.radius2


def credible_region_highdim(draws, level=0.95, jitter=1e-10):
    """Normal-approximation region from angle draws of shape (S, D - 1).

    The last angle is moved onto the 2 pi window centred at its circular
    mean before the mean and covariance are taken.
    """
    x = np.atleast_2d(np.asarray(draws, dtype=float))
    S, p = x.shape
    if S < p + 1:
        raise ValueError(f"need at least {p + 1} draws for a {p}-dimensional region")
    x = x.copy()
    c, s, r = _resultant(x[:, -1])
    center = float(arctan_star(c, s)) if r >= RESULTANT_TOL else np.pi
    x[:, -1] = _recenter(x[:, -1], center)
    mean = x.mean(axis=0)
    cov = np.atleast_2d(np.cov(x, rowvar=False))
    scale = max(float(np.trace(cov)) / p, 1.0)
    cov = cov + jitter * scale * np.eye(p)
    if np.linalg.cond(cov) > 1e14:
        cov = cov + 1e-8 * scale * np.eye(p)
    return CredibleRegion(mean, cov, float(chi2.ppf(level, p)))


def rhat(chains, split=True):
    """Potential scale reduction factor for scalar traces.

    With ``split`` each chain is halved first. Within-chain variances use
    ddof = 0 so that chains that agree in mean give exactly 1.
    """
    x = np.asarray(chains, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 4:
        raise ValueError("rhat needs at least 2 chains of length >= 4")
    if split:
        h = x.shape[1] // 2
        x = np.concatenate([x[:, :h], x[:, x.shape[1] - h:]], axis=0)
    n = x.shape[1]
    w = x.var(axis=1).mean()
    b = n * x.mean(axis=1).var(ddof=1)
    if w == 0.0:
        return np.inf if b > 0 else 1.0
    return float(np.sqrt((w + b / n) / w))


# ---------------------------------------------------------------------------
# recovery scoring

def _stack_chains(chains):
    if not isinstance(chains, (list, tuple)):
        chains = [chains]
    z = np.concatenate([c.z for c in chains])
    return (z, np.concatenate([c.varphi for c in chains]), np.concatenate([c.lam for c in chains]),
            np.concatenate([c.nu for c in chains]))


def _posterior_mean_units(z):
    # (S, K, D, N) -> resultant mean direction per (K, N), shape (K, N, D)
    u = z / np.linalg.norm(z, axis=2, keepdims=True)
    m = u.mean(axis=0)
    m = m / np.maximum(np.linalg.norm(m, axis=1, keepdims=True), 1e-300)
    return np.moveaxis(m, 1, 2)


def best_permutation(fit_units, true_units):
    """Assignment of fitted to true components minimising total angular distance.

    ``fit_units`` (K_fit, N, D), ``true_units`` (K_true, N, D); returns a tuple
    perm with fitted component perm[j] matched to true component j.
    """
    kf, kt = fit_units.shape[0], true_units.shape[0]
    if kf < kt:
        raise ValueError("fewer fitted components than true components")
    cost = np.arccos(np.clip(np.einsum("and,bnd->abn", fit_units, true_units), -1, 1)).sum(axis=2)
    best, best_cost = None, np.inf
    for perm in permutations(range(kf), kt):
        c = sum(cost[perm[j], j] for j in range(kt))
        if c < best_cost - 1e-12:
            best, best_cost = perm, c
    return best


@dataclass
class RecoveryReport:
    coverage: float
    coverage_by_component: list
    permutation: tuple
    table: list = field(default_factory=list)   # one dict per component
    level: float = 0.95
    note: str = "location averages of circular means use resultant vectors"

    def to_dict(self):
        return {"coverage": self.coverage, "coverage_by_component": self.coverage_by_component,
                "permutation": list(self.permutation), "level": self.level,
                "table": self.table, "note": self.note}


def _location_average_mean(units):
    """Resultant direction of per-location mean directions, (N, D) -> (D,)."""
    s = units.sum(axis=0)
    return s / np.linalg.norm(s)


def recovery_report(chains, truth, level=0.95):
    """Coverage of generating means by posterior intervals (D = 2) or
    Gaussian-approximation regions (D > 2), after component alignment."""
    z, varphi, lam, nu = _stack_chains(chains)
    S, K, D, N = z.shape
    fit_units = _posterior_mean_units(z)
    perm = best_permutation(fit_units, truth.mean_units)
    u_draws = z / np.linalg.norm(z, axis=2, keepdims=True)
    cover, table = [], []
    for j, k in enumerate(perm):
        hits = np.empty(N, bool)
        if D == 2:
            ang = arctan_star(u_draws[:, k, 0, :], u_draws[:, k, 1, :])
            tru = truth.mean_angles[j]
            for n in range(N):
                try:
                    lo, hi = circular_interval(ang[:, n], level)
                    hits[n] = bool(in_circular_interval(tru[n], lo, hi))
                except UndefinedMeanError:
                    hits[n] = True  # posterior uniform on the circle covers everything
        else:
            ang = unit_to_direction(np.moveaxis(u_draws[:, k], 1, 2))    # (S, N, D-1)
            tru = unit_to_direction(truth.mean_units[j])                  # (N, D-1)
            for n in range(N):
                hits[n] = bool(credible_region_highdim(ang[:, n], level).contains(tru[n]))
        cover.append(float(hits.mean()))
        fm = _location_average_mean(fit_units[k])
        tm = _location_average_mean(truth.mean_units[j])
        row = {
            "component": j + 1,
            "fitted_component": int(k) + 1,
            "true_rho_bar": float(truth.rho[j].mean()),
            "fitted_rho_bar": float(np.exp(varphi[:, k]).mean()),
            "true_lambda": float(truth.mix[j]) if j < len(truth.mix) else None,
            "fitted_lambda": float(lam[:, k].mean()),
            "mean_error": float(np.arccos(np.clip(fm @ tm, -1, 1))),
            "coverage": cover[-1],
        }
        if D == 2:
            row["true_m_bar"] = float(arctan_star(tm[0], tm[1]))
            row["fitted_m_bar"] = float(arctan_star(fm[0], fm[1]))
        else:
            row["true_m_bar"] = tm.tolist()
            row["fitted_m_bar"] = fm.tolist()
        table.append(row)
    total = float(np.mean(cover)) if cover else float("nan")
    return RecoveryReport(total, cover, tuple(int(p) for p in perm), table, level)
