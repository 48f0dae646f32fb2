"""Gibbs sampler for SvM / SvM-c: labels, elliptical slice moves, HMC.

Each iteration draws the labels (skipped when K = 1), refreshes every GP
surface by elliptical slice sampling and then moves all log-concentrations
and their hierarchical means jointly with HMC in the non-centred form
varphi = varsigma * varphi_tilde + nu.
"""
import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .model import ParameterState, alignments, component_factors, component_loglik, gp_mean_array

log = logging.getLogger(__name__)
ESS_MAX_SHRINK = 1000


@dataclass(frozen=True)
class SamplerConfig:
    iterations: int = 10000
    burn_in: int = 5000
    thin: int = 5
    hmc_step_size: float = 0.1
    hmc_leapfrog_steps: int = 10
    chains: int = 4
    seed: int = 0
    update_lambda: bool = False  # Dirichlet(1,...,1) update, off by default

    def __post_init__(self):
        if min(self.iterations, self.thin, self.hmc_leapfrog_steps, self.chains) < 1:
            raise ValueError("iterations, thin, leapfrog steps and chains must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must lie in [0, iterations)")
        if self.hmc_step_size <= 0:
            raise ValueError("hmc_step_size must be positive")

    @property
    def n_draws(self):
        return (self.iterations - self.burn_in) // self.thin

    @classmethod
    def preset(cls, name, **kw):
        base = {
            "2d": dict(iterations=10000, burn_in=5000, thin=5, chains=4),
            "highdim": dict(iterations=25000, burn_in=20000, thin=5, chains=4),
            "desk": dict(iterations=2000, burn_in=1000, thin=5, chains=1),
        }[name]
        base.update(kw)
        return cls(**base)


@dataclass
class PosteriorChain:
    """Thinned post-burn-in draws stacked along the first axis."""
    z: np.ndarray
    varphi: np.ndarray
    nu: np.ndarray
    zeta: np.ndarray
    lam: np.ndarray
    acceptance_stats: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)

    def __len__(self):
        return self.z.shape[0]

    @property
    def draws(self):
        return [self.state(i) for i in range(len(self))]

    def state(self, i):
        return ParameterState(self.z[i], self.varphi[i], self.nu[i], self.zeta[i])


# ---------------------------------------------------------------------------
# labels

def label_log_probs(spec, state, data, lam=None):
    lam = spec.lam if lam is None else lam
    with np.errstate(divide="ignore"):
        return np.log(lam)[:, None] + component_loglik(state, data)


def sample_labels(spec, state, data, rng, lam=None):
    """Draw every label from its categorical full conditional."""
    if spec.K == 1:
        return np.zeros(data.N, dtype=np.int64)
    lp = label_log_probs(spec, state, data, lam)
    top = lp.max(axis=0)
    bad = ~np.isfinite(top)
    if bad.any():
        warnings.warn(f"{bad.sum()} label distributions underflowed; using uniform", RuntimeWarning)
        lp[:, bad] = 0.0
        top[bad] = 0.0
    p = np.exp(lp - top)
    p /= p.sum(axis=0)
    cdf = np.cumsum(p, axis=0)
    u = rng.random(data.N)
    zeta = (u[None, :] > cdf).sum(axis=0)
    return np.minimum(zeta, spec.K - 1).astype(np.int64)


# ---------------------------------------------------------------------------
# elliptical slice sampling

def _ess(f0, prior_draw, loglik, rng):
    """One elliptical slice move on f0 (centred) with auxiliary prior draw."""
    cur = loglik(f0)
    log_c = cur + np.log(rng.random())
    a = rng.uniform(0.0, 2.0 * np.pi)
    lo, hi = a - 2.0 * np.pi, a
    for shrink in range(ESS_MAX_SHRINK):
        f = f0 * np.cos(a) + prior_draw * np.sin(a)
        ll = loglik(f)
        if ll > log_c:
            return f, shrink
        if a < 0.0:
            lo = a
        else:
            hi = a
        a = rng.uniform(lo, hi)
    raise RuntimeError("elliptical slice sampler failed to terminate")


def _weighted_rho(state, k):
    w = (state.zeta == k).astype(float)
    return w * np.exp(state.varphi[k])


def ess_update_2d(spec, state, data, k, rng, factors=None, mu=None):
    """Joint slice move on the stacked (z_k1 - mu_k1, z_k2 - mu_k2)."""
    factors = component_factors(spec, data.locations) if factors is None else factors
    mu = gp_mean_array(spec, data.N) if mu is None else mu
    L = factors[k].lower_cholesky
    n = data.N
    wr = _weighted_rho(state, k)
    y = data.obs

    def loglik(f):
        z = f.reshape(2, n) + mu[k]
        return float(wr @ kernels.alignment(z, y))

    f0 = (state.z[k] - mu[k]).reshape(-1)
    u = (L @ rng.standard_normal((n, 2))).T.reshape(-1)
    f, shrink = _ess(f0, u, loglik, rng)
    z = state.z.copy()
    z[k] = f.reshape(2, n) + mu[k]
    return z, shrink


def ess_update_highdim(spec, state, data, k, d, rng, factors=None, mu=None):
    """Slice move on z_kd - mu_kd with the other coordinates held fixed."""
    factors = component_factors(spec, data.locations) if factors is None else factors
    mu = gp_mean_array(spec, data.N) if mu is None else mu
    L = factors[k].lower_cholesky
    wr = _weighted_rho(state, k)
    y = data.obs
    zk = state.z[k].copy()

    def loglik(f):
        zk[d] = f + mu[k, d]
        return float(wr @ kernels.alignment(zk, y))

    f0 = state.z[k, d] - mu[k, d]
    u = L @ rng.standard_normal(data.N)
    f, shrink = _ess(f0, u, loglik, rng)
    z = state.z.copy()
    z[k, d] = f + mu[k, d]
    return z, shrink


# ---------------------------------------------------------------------------
# HMC over (varphi_tilde, nu)

def _labels_onehot(state, K):
    return (state.zeta[None, :] == np.arange(K)[:, None]).astype(float)


def concentration_potential(spec, state, data, phi_t, nu, align=None, onehot=None):
    """U and its gradient in the non-centred coordinates.

    Returns (U, dU/dphi_t, dU/dnu).
    """
    K = spec.K
    align = alignments(state, data) if align is None else align
    onehot = _labels_onehot(state, K) if onehot is None else onehot
    varphi = spec.varsigma * phi_t + nu[:, None]
    rho = np.exp(varphi)
    total = 0.0
    g = np.empty_like(varphi)
    for k in range(K):
        t, g[k] = kernels.concentration_terms(spec.D, rho[k], align[k], onehot[k])
        total += t
    logp = total - 0.5 * np.sum(phi_t * phi_t) - 0.5 * np.sum(nu * nu) / spec.tau ** 2
    grad_phi = g * spec.varsigma - phi_t
    grad_nu = g.sum(axis=1) - nu / spec.tau ** 2
    return -logp, -grad_phi, -grad_nu


def hmc_update(spec, state, data, config, rng, step_size=None):
    """One leapfrog trajectory with Metropolis correction.

    Returns (varphi, nu, accepted, accept_prob).
    """
    eps = config.hmc_step_size if step_size is None else step_size
    n_steps = config.hmc_leapfrog_steps
    align = alignments(state, data)
    onehot = _labels_onehot(state, spec.K)
    phi_t = (state.varphi - state.nu[:, None]) / spec.varsigma
    nu = state.nu.copy()

    def pot(p, v):
        return concentration_potential(spec, state, data, p, v, align, onehot)

    U0, gp, gn = pot(phi_t, nu)
    mp = rng.standard_normal(phi_t.shape)
    mn = rng.standard_normal(nu.shape)
    H0 = U0 + 0.5 * (np.sum(mp * mp) + np.sum(mn * mn))
    p, v = phi_t.copy(), nu.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        mp = mp - 0.5 * eps * gp
        mn = mn - 0.5 * eps * gn
        for i in range(n_steps):
            p = p + eps * mp
            v = v + eps * mn
            U1, gp, gn = pot(p, v)
            if not (np.isfinite(U1) and np.all(np.isfinite(gp)) and np.all(np.isfinite(gn))):
                log.debug("non-finite HMC trajectory; rejecting")
                return state.varphi.copy(), state.nu.copy(), False, 0.0
            half = 0.5 if i == n_steps - 1 else 1.0
            mp = mp - half * eps * gp
            mn = mn - half * eps * gn
        H1 = U1 + 0.5 * (np.sum(mp * mp) + np.sum(mn * mn))
    log_acc = min(0.0, H0 - H1) if np.isfinite(H1) else -np.inf
    acc_prob = float(np.exp(log_acc))
    if np.log(rng.random()) < log_acc:
        return spec.varsigma * p + v[:, None], v, True, acc_prob
    return state.varphi.copy(), state.nu.copy(), False, acc_prob


# ---------------------------------------------------------------------------
# chain driver

def gibbs_sweep(spec, state, data, config, rng, factors, mu, lam, step_size=None):
    """One full iteration; returns (state, lam, accepted, accept_prob, shrinks)."""
    if spec.K > 1:
        state.zeta = sample_labels(spec, state, data, rng, lam)
    shrinks = 0
    for k in range(spec.K):
        if spec.D == 2:
            state.z, s = ess_update_2d(spec, state, data, k, rng, factors, mu)
            shrinks += s
        else:
            for d in range(spec.D):
                state.z, s = ess_update_highdim(spec, state, data, k, d, rng, factors, mu)
                shrinks += s
    state.varphi, state.nu, acc, prob = hmc_update(spec, state, data, config, rng, step_size)
    if config.update_lambda and spec.K > 1:
        counts = np.bincount(state.zeta, minlength=spec.K)
        lam = rng.dirichlet(1.0 + counts)
    return state, lam, acc, prob, shrinks


def run_chain(spec, data, init, config, rng, factors=None, progress=None, step_size=None):
    """Run one chain from ``init`` and keep every ``thin``-th post-burn-in state.

    ``step_size`` overrides ``config.hmc_step_size`` (e.g. a tuned value).
    """
    if init.z.shape != (spec.K, spec.D, data.N):
        raise ValueError("initial state does not match the model spec")
    factors = component_factors(spec, data.locations) if factors is None else factors
    mu = gp_mean_array(spec, data.N)
    state = init.copy()
    lam = spec.lam.copy()
    S = config.n_draws
    out = dict(
        z=np.empty((S,) + state.z.shape), varphi=np.empty((S,) + state.varphi.shape),
        nu=np.empty((S, spec.K)), zeta=np.empty((S, data.N), np.int64), lam=np.empty((S, spec.K)))
    n_acc, acc_sum, shrink_sum, n_ess = 0, 0.0, 0, 0
    t0 = time.perf_counter()
    j = 0
    for it in range(1, config.iterations + 1):
        state, lam, acc, prob, shrinks = gibbs_sweep(spec, state, data, config, rng, factors, mu, lam,
                                                       step_size)
        n_acc += acc
        acc_sum += prob
        shrink_sum += shrinks
        n_ess += spec.K * (1 if spec.D == 2 else spec.D)
        if it > config.burn_in and (it - config.burn_in) % config.thin == 0 and j < S:
            out["z"][j] = state.z
            out["varphi"][j] = state.varphi
            out["nu"][j] = state.nu
            out["zeta"][j] = state.zeta
            out["lam"][j] = lam
            j += 1
        if progress is not None:
            progress(it)
    stats = {
        "hmc_accept_rate": n_acc / config.iterations,
        "hmc_mean_accept_prob": acc_sum / config.iterations,
        "ess_mean_shrinks": shrink_sum / max(n_ess, 1),
    }
    return PosteriorChain(**out, acceptance_stats=stats,
                          timing={"seconds": time.perf_counter() - t0})


def tune_step_size(spec, data, init, target_accept, rng, config=None, pilot=200, window=100,
                   fallback=0.01, refine=8, refine_window=100, retries=3):
    """Adapt the HMC step size to a target acceptance rate.

    Dual averaging on log eps during two pilot runs (the first doubles as
    warm-up) gives a first value. Leapfrog
    acceptance often drops off a cliff at the stability limit, so the averaged
    iterate can sit well inside it; a bisection on log eps between a bracket
    of measured windows then refines it. The result is checked on a fresh
    window; if the measured rate is not within 10 percentage points of the
    target, or no bracket exists, ``fallback`` is returned with a warning.
    """
    if not 0.0 < target_accept < 1.0:
        raise ValueError("target_accept must lie in (0, 1)")
    config = SamplerConfig(iterations=2, burn_in=0) if config is None else config
    if not 0.05 <= target_accept <= 0.95:
        warnings.warn(f"cannot bracket acceptance target {target_accept}; using eps={fallback}",
                      RuntimeWarning)
        return fallback
    factors = component_factors(spec, data.locations)
    mu = gp_mean_array(spec, data.N)
    chain = {"state": init.copy(), "lam": spec.lam.copy()}

    def sweeps(eps, n):
        probs, hits = 0.0, 0
        for _ in range(n):
            chain["state"], chain["lam"], acc, prob, _ = gibbs_sweep(
                spec, chain["state"], data, config, rng, factors, mu, chain["lam"], eps)
            probs += prob
            hits += acc
        return probs / n, hits / n

    # Hoffman & Gelman (2014) dual averaging on log eps. The first pilot also
    # serves as warm-up; averaging restarts from where it ended, since the
    # acceptance curve shifts while the concentrations move toward the posterior.
    lo, hi = np.log(1e-5), np.log(5.0)
    log_eps = np.log(config.hmc_step_size)
    gamma, t0, kappa = 0.05, 10.0, 0.75
    for _ in range(2):
        mu_da = log_eps + np.log(10.0)
        h_bar, log_eps_bar = 0.0, 0.0
        for t in range(1, pilot + 1):
            prob, _ = sweeps(float(np.exp(log_eps)), 1)
            eta = 1.0 / (t + t0)
            h_bar = (1.0 - eta) * h_bar + eta * (target_accept - prob)
            log_eps = np.clip(mu_da - np.sqrt(t) / gamma * h_bar, lo, hi)
            w = t ** (-kappa)
            log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar
        log_eps = log_eps_bar

    # bracket the target, then bisect in log space
    x = float(log_eps_bar)
    r = sweeps(np.exp(x), refine_window)[0]
    step = np.log(2.0)
    a = b = x
    ra = rb = r
    for _ in range(12):
        if (ra - target_accept) * (rb - target_accept) <= 0 and a != b:
            break
        if r > target_accept:
            a, ra = b, rb
            b = min(b + step, hi)
            rb = sweeps(np.exp(b), refine_window)[0]
            r = rb
        else:
            b, rb = a, ra
            a = max(a - step, lo)
            ra = sweeps(np.exp(a), refine_window)[0]
            r = ra
    lo_x, hi_x = min(a, b), max(a, b)
    r_lo, r_hi = (ra, rb) if a <= b else (rb, ra)
    bracketed = (r_lo - target_accept) * (r_hi - target_accept) <= 0
    x = float(log_eps_bar)
    rate = None
    if bracketed and lo_x < hi_x:
        for attempt in range(retries + 1):
            for _ in range(refine if attempt == 0 else 3):
                mid = 0.5 * (lo_x + hi_x)
                if sweeps(np.exp(mid), refine_window)[0] > target_accept:
                    lo_x = mid
                else:
                    hi_x = mid
            x = 0.5 * (lo_x + hi_x)
            rate = sweeps(np.exp(x), window)[1]
            if abs(rate - target_accept) <= 0.10:
                break
            # the check window is one more measurement for the bracket
            if rate > target_accept:
                lo_x = x
            else:
                hi_x = x
    eps = float(np.exp(x))
    if rate is None or abs(rate - target_accept) > 0.10 or x <= lo + 1e-9 or x >= hi - 1e-9:
        warnings.warn(f"step-size tuning missed target {target_accept} (rate {rate}); "
                      f"using eps={fallback}", RuntimeWarning)
        return fallback
    return eps
