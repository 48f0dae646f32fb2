"""Regularized EM on the non-centred parameterization, used to start the chains.

Parameters are lam, the whitened GP draws z_tilde (z = mu + L z_tilde), the
log-concentrations varphi and their means nu; the labels are latent. Every
gradient block uses a backtracking (Armijo) line search, so the expected
conditional log posterior never decreases within an M step.
"""
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import kernels
from .model import ParameterState, component_factors, gp_mean_array

log = logging.getLogger(__name__)
HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)
ARMIJO_C = 1e-4


@dataclass
class EmState:
    lam: np.ndarray         # (K,)
    z_tilde: np.ndarray     # (K, D, N)
    varphi: np.ndarray      # (K, N)
    nu: np.ndarray          # (K,)
    r: np.ndarray = None    # (K, N)
    history: list = field(default_factory=list)

    def copy(self):
        return EmState(self.lam.copy(), self.z_tilde.copy(), self.varphi.copy(), self.nu.copy(),
                       None if self.r is None else self.r.copy(), list(self.history))


@dataclass(frozen=True)
class EmConfig:
    max_iters: int = 200
    tol: float = 1e-6
    restarts: int = 5
    init_scale: float = 0.1
    inner_steps: int = 3
    max_halvings: int = 60
    cap_concentration: bool = True


class _Problem:
    """Cached model pieces for one dataset."""

    def __init__(self, spec, data, factors=None):
        self.spec = spec
        self.data = data
        self.factors = component_factors(spec, data.locations) if factors is None else factors
        self.mu = gp_mean_array(spec, data.N)
        self.L = [f.lower_cholesky for f in self.factors]

    def z(self, z_tilde):
        return np.stack([self.mu[k] + z_tilde[k] @ self.L[k].T for k in range(self.spec.K)])

    def z_k(self, z_tilde_k, k):
        return self.mu[k] + z_tilde_k @ self.L[k].T

    def loglik(self, z, varphi):
        """(K, N) component log-densities."""
        rho = np.exp(varphi)
        K = self.spec.K
        a = np.stack([kernels.alignment(z[k], self.data.obs) for k in range(K)])
        norm = kernels.log_norm_const(self.spec.D, rho.reshape(-1)).reshape(rho.shape)
        return rho * a + norm


def _safe_log(lam):
    with np.errstate(divide="ignore"):
        return np.log(lam)


def _prior_terms(spec, em):
    s2, t2 = spec.varsigma ** 2, spec.tau ** 2
    out = np.sum(-0.5 * em.z_tilde ** 2 - HALF_LOG_2PI)
    dev = em.varphi - em.nu[:, None]
    out += np.sum(-0.5 * dev ** 2 / s2 - HALF_LOG_2PI - 0.5 * np.log(s2))
    out += np.sum(-0.5 * em.nu ** 2 / t2 - HALF_LOG_2PI - 0.5 * np.log(t2))
    return float(out)


def _responsibilities(lp):
    top = lp.max(axis=0)
    bad = ~np.isfinite(top)
    if bad.any():
        warnings.warn(f"{bad.sum()} responsibility columns underflowed; using uniform",
                      RuntimeWarning)
        lp = lp.copy()
        lp[:, bad] = 0.0
    return np.exp(lp - logsumexp(lp, axis=0))


def expected_log_posterior(spec, em, data, r, problem=None):
    """Expected conditional log unnormalized posterior Q(Theta | r)."""
    pb = _Problem(spec, data) if problem is None else problem
    ll = pb.loglik(pb.z(em.z_tilde), em.varphi)
    terms = _safe_log(em.lam)[:, None] + ll
    like = np.sum(np.where(r > 0, r * terms, 0.0))
    return float(like) + _prior_terms(spec, em)


def observed_log_posterior(spec, em, data, problem=None):
    """sum_l log sum_k lam_k f_k(y_l) plus the parameter priors."""
    pb = _Problem(spec, data) if problem is None else problem
    lp = _safe_log(em.lam)[:, None] + pb.loglik(pb.z(em.z_tilde), em.varphi)
    return float(logsumexp(lp, axis=0).sum()) + _prior_terms(spec, em)


def e_step(spec, em, data, problem=None):
    """Responsibilities and the expected log posterior at the current parameters."""
    pb = _Problem(spec, data) if problem is None else problem
    lp = _safe_log(em.lam)[:, None] + pb.loglik(pb.z(em.z_tilde), em.varphi)
    r = _responsibilities(lp)
    return r, expected_log_posterior(spec, em, data, r, pb)


# ---------------------------------------------------------------------------
# block objectives and gradients (terms that do not involve the block dropped)

def _z_block(pb, em, r, k, d, zt_kd):
    """Objective and gradient for z_tilde[k, d]."""
    zt = em.z_tilde[k].copy()
    zt[d] = zt_kd
    z = pb.z_k(zt, k)
    y = pb.data.obs
    nrm = np.sqrt(np.sum(z * z, axis=0))
    a = np.einsum("dn,nd->n", z, y) / nrm
    w = r[k] * np.exp(em.varphi[k])
    f = float(w @ a) - 0.5 * float(zt_kd @ zt_kd)
    # d a / d z_d = (y_d - m_d a) / |z|, then chain through L
    g_z = w * (y[:, d] - z[d] / nrm * a) / nrm
    return f, pb.L[k].T @ g_z - zt_kd


def z_tilde_gradient(spec, em, data, r, problem=None):
    """Gradient of Q with respect to every z_tilde entry, shape (K, D, N)."""
    pb = _Problem(spec, data) if problem is None else problem
    out = np.empty_like(em.z_tilde)
    for k in range(spec.K):
        for d in range(spec.D):
            out[k, d] = _z_block(pb, em, r, k, d, em.z_tilde[k, d])[1]
    return out


def _align(pb, em, k):
    z = pb.z_k(em.z_tilde[k], k)
    return kernels.alignment(z, pb.data.obs)


def _phi_block(pb, em, r, k, phi_k, align_k):
    s2 = pb.spec.varsigma ** 2
    total, g = kernels.concentration_terms(pb.spec.D, np.exp(phi_k), align_k, r[k])
    dev = phi_k - em.nu[k]
    return total - 0.5 * float(dev @ dev) / s2, g - dev / s2


def varphi_gradient(spec, em, data, r, problem=None):
    pb = _Problem(spec, data) if problem is None else problem
    return np.stack([_phi_block(pb, em, r, k, em.varphi[k], _align(pb, em, k))[1]
                     for k in range(spec.K)])


def _shift_block(pb, em, r, k, delta, align_k):
    # move varphi_k and nu_k together; the (varphi - nu) prior is unchanged
    phi = em.varphi[k] + delta
    nu = em.nu[k] + delta
    total, g = kernels.concentration_terms(pb.spec.D, np.exp(phi), align_k, r[k])
    t2 = pb.spec.tau ** 2
    return total - 0.5 * nu * nu / t2, float(g.sum()) - nu / t2


def _ascend(fun, x0, max_halvings, step0=1.0):
    """Backtracking gradient ascent step; returns x unchanged if no gain."""
    f0, g0 = fun(x0)
    gg = float(np.sum(g0 * g0))
    if not np.isfinite(f0) or gg == 0.0:
        return x0, f0
    t = step0
    for _ in range(max_halvings):
        x = x0 + t * g0
        f = fun(x)[0]
        if np.isfinite(f) and f >= f0 + ARMIJO_C * t * gg:
            return x, f
        t *= 0.5
    return x0, f0


def m_step(spec, em, data, config=None, problem=None):
    """One M step given ``em.r``; returns a new EmState."""
    config = EmConfig() if config is None else config
    pb = _Problem(spec, data) if problem is None else problem
    r = em.r
    new = em.copy()
    new.lam = r.sum(axis=1) / data.N
    for k in range(spec.K):
        for d in range(spec.D):
            for _ in range(config.inner_steps):
                x, _ = _ascend(lambda v: _z_block(pb, new, r, k, d, v), new.z_tilde[k, d],
                               config.max_halvings)
                new.z_tilde[k, d] = x
        align_k = _align(pb, new, k)
        curv = float(np.sum(r[k] * np.exp(new.varphi[k]))) + 1.0 / spec.tau ** 2
        for _ in range(config.inner_steps):
            x, _ = _ascend(lambda v: _phi_block(pb, new, r, k, v, align_k), new.varphi[k],
                           config.max_halvings, step0=spec.varsigma ** 2)
            new.varphi[k] = x
            delta, _ = _ascend(lambda v: _shift_block(pb, new, r, k, v, align_k), 0.0,
                               config.max_halvings, step0=1.0 / max(curv, 1e-3))
            new.varphi[k] += delta
            new.nu[k] += delta
        # exact maximiser of the concave quadratic in nu
        s2, t2 = spec.varsigma ** 2, spec.tau ** 2
        new.nu[k] = (new.varphi[k].sum() / s2) / (data.N / s2 + 1.0 / t2)
    return new


def init_em_state(spec, data, rng, scale=0.1):
    K, D, N = spec.K, spec.D, data.N
    return EmState(spec.lam.copy(), scale * rng.standard_normal((K, D, N)),
                   np.zeros((K, N)), np.zeros(K))


def _run_one(spec, data, em, config, pb):
    em = em.copy()
    em.history = []
    prev = -np.inf
    for it in range(config.max_iters):
        em.r, q = e_step(spec, em, data, pb)
        obj = observed_log_posterior(spec, em, data, pb)
        em.history.append(obj)
        if it > 0 and abs(obj - prev) < config.tol * max(1.0, abs(obj)):
            break
        prev = obj
        em = m_step(spec, em, data, config, pb)
    em.r, _ = e_step(spec, em, data, pb)
    return em


def to_parameter_state(spec, em, data, problem=None):
    pb = _Problem(spec, data) if problem is None else problem
    zeta = np.argmax(em.r, axis=0) if em.r is not None else np.zeros(data.N, int)
    return ParameterState(pb.z(em.z_tilde), em.varphi.copy(), em.nu.copy(), zeta)


def moment_concentration(spec, data, r, lo=1e-3, hi=1e4):
    """Per-component rho solving A_D(rho) = mean alignment of y with the prior mean direction.

    Alignments are weighted by the responsibilities ``r`` (K, N). The GP
    spread around the prior mean widens the data, so this is biased low.
    """
    mu = gp_mean_array(spec, data.N)
    v = 0.5 * spec.D - 1.0
    out = np.empty(spec.K)
    for k in range(spec.K):
        a = kernels.alignment(mu[k], data.obs)
        w = r[k].sum()
        abar = float(r[k] @ a / w) if w > 0 else 0.0
        if abar <= float(kernels.iv_ratio(v, np.array([lo]))[0]):
            out[k] = lo
            continue
        a_lo, a_hi = np.log(lo), np.log(hi)
        for _ in range(60):
            mid = 0.5 * (a_lo + a_hi)
            if kernels.iv_ratio(v, np.array([np.exp(mid)]))[0] < abar:
                a_lo = mid
            else:
                a_hi = mid
        out[k] = np.exp(0.5 * (a_lo + a_hi))
    return out


def run_em(spec, data, restarts=None, max_iters=None, tol=None, rng=None, config=None):
    """Best of several EM restarts, as (EmState, ParameterState).

    The returned state is centred: z = mu + L z_tilde, labels are the
    arg-max responsibilities and rho = exp(varphi). With
    ``config.cap_concentration`` the state's log-concentrations are capped at
    :func:`moment_concentration`. When the GP can interpolate every
    observation the joint mode has runaway rho, and a chain started there
    stays in the funnel.
    """
    config = EmConfig() if config is None else config
    kw = {}
    if restarts is not None:
        kw["restarts"] = restarts
    if max_iters is not None:
        kw["max_iters"] = max_iters
    if tol is not None:
        kw["tol"] = tol
    if kw:
        config = EmConfig(**{**config.__dict__, **kw})
    if config.restarts < 1:
        raise ValueError("restarts must be at least 1")
    rng = np.random.default_rng(0) if rng is None else rng
    pb = _Problem(spec, data)
    best, best_obj = None, -np.inf
    for _ in range(config.restarts):
        em = _run_one(spec, data, init_em_state(spec, data, rng, config.init_scale), config, pb)
        obj = observed_log_posterior(spec, em, data, pb)
        if best is None or obj > best_obj:
            best, best_obj = em, obj
    log.info("EM best objective %.6f after %d iterations", best_obj, len(best.history))
    state = to_parameter_state(spec, best, data, pb)
    if config.cap_concentration:
        cap = np.log(moment_concentration(spec, data, best.r))
        state.varphi = np.minimum(state.varphi, cap[:, None])
        state.nu = np.minimum(state.nu, cap)
    return best, state
