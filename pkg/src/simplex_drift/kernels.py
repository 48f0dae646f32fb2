"""Hot numeric kernels: modified Bessel functions and concentration terms.

Each kernel has a numba loop implementation (``_nb_*``) and a vectorised
numpy implementation (``_np_*``). The public names dispatch on
:data:`simplex_drift._accel.USE_NUMBA`. Both paths evaluate the same
expansions, so they agree to rounding.

Regimes for I_v(x), v >= 0, x >= 0:

* ascending series for ``x <= max(30, 15 (v + 1))``
* Hankel large-argument expansion when ``x`` is beyond that and ``4 v^2 <= x``
* log-space series for the remaining ``x <= 700``
* uniform (Debye) expansion otherwise (large order and argument; ~1e-6)
"""
import math

import numpy as np

from ._accel import USE_NUMBA, jit

LOG_2PI = math.log(2.0 * math.pi)
_SERIES_MIN = 30.0
_EPS = 1e-17
_MAX_SERIES = 2000
_MAX_HANKEL = 80


# ---------------------------------------------------------------------------
# scalar building blocks (compiled when numba is present)

@jit
def _series_sum(v, x):
    # sum_k t_k with t_0 = 1, t_k = t_{k-1} (x/2)^2 / (k (k + v))
    q = 0.25 * x * x
    s = 1.0
    t = 1.0
    k = 0
    while k < _MAX_SERIES:
        k += 1
        t *= q / (k * (k + v))
        s += t
        if t < _EPS * s and k > 0.5 * x:
            break
    return s


@jit
def _hankel_sum(v, x):
    # sum_k (-1)^k a_k(v) / x^k; I_v(x) ~ e^x / sqrt(2 pi x) * sum
    mu = 4.0 * v * v
    s = 1.0
    t = 1.0
    prev = 1.0
    for k in range(1, _MAX_HANKEL):
        t *= -(mu - (2.0 * k - 1.0) ** 2) / (8.0 * k * x)
        at = abs(t)
        if at > prev:
            break
        s += t
        prev = at
        if at < _EPS * abs(s):
            break
    return s


@jit
def _debye_log(v, x):
    z = x / v
    w = math.sqrt(1.0 + z * z)
    t = 1.0 / w
    eta = w + math.log(z / (1.0 + w))
    t2 = t * t
    u1 = t * (3.0 - 5.0 * t2) / 24.0
    u2 = t2 * (81.0 - 462.0 * t2 + 385.0 * t2 * t2) / 1152.0
    u3 = t * t2 * (30375.0 - 369603.0 * t2 + 765765.0 * t2 * t2
                   - 425425.0 * t2 * t2 * t2) / 414720.0
    corr = 1.0 + u1 / v + u2 / (v * v) + u3 / (v * v * v)
    return v * eta - 0.5 * math.log(2.0 * math.pi * v) - 0.5 * math.log(w) + math.log(corr)


@jit
def _regime(v, x):
    # 0 series, 1 hankel, 2 log-series, 3 debye
    if x <= max(_SERIES_MIN, 15.0 * (v + 1.0)):
        return 0
    if 4.0 * v * v <= x:
        return 1
    if x <= 700.0:
        return 2
    return 3


@jit
def _log_iv_scalar(v, x):
    if x == 0.0:
        return 0.0 if v == 0.0 else -np.inf
    r = _regime(v, x)
    if r == 0 or r == 2:
        return v * math.log(0.5 * x) - math.lgamma(v + 1.0) + math.log(_series_sum(v, x))
    if r == 1:
        return x - 0.5 * math.log(2.0 * math.pi * x) + math.log(_hankel_sum(v, x))
    return _debye_log(v, x)


@jit
def _ratio_scalar(v, x):
    # I_{v+1}(x) / I_v(x)
    if x == 0.0:
        return 0.0
    r = _regime(v, x)
    if r == 0 or r == 2:
        return 0.5 * x / (v + 1.0) * _series_sum(v + 1.0, x) / _series_sum(v, x)
    if r == 1 and 4.0 * (v + 1.0) ** 2 <= x:
        return _hankel_sum(v + 1.0, x) / _hankel_sum(v, x)
    return math.exp(_log_iv_scalar(v + 1.0, x) - _log_iv_scalar(v, x))


@jit
def _log_norm_scalar(dim, rho):
    # log of rho^{dim/2-1} / ((2 pi)^{dim/2} I_{dim/2-1}(rho)), finite at rho = 0
    v = 0.5 * dim - 1.0
    r = _regime(v, rho)
    if r == 0:
        # rho^v / I_v(rho) = 2^v Gamma(v + 1) / series
        return (v * math.log(2.0) + math.lgamma(v + 1.0) - math.log(_series_sum(v, rho))
                - 0.5 * dim * LOG_2PI)
    return v * math.log(rho) - 0.5 * dim * LOG_2PI - _log_iv_scalar(v, rho)


# ---------------------------------------------------------------------------
# numba array kernels

@jit
def _nb_log_iv(v, x):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        out[i] = _log_iv_scalar(v, x[i])
    return out


@jit
def _nb_iv_ratio(v, x):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        out[i] = _ratio_scalar(v, x[i])
    return out


@jit
def _nb_log_norm(dim, rho):
    out = np.empty(rho.shape[0])
    for i in range(rho.shape[0]):
        out[i] = _log_norm_scalar(dim, rho[i])
    return out


@jit
def _nb_concentration_terms(dim, rho, align, weight):
    v = 0.5 * dim - 1.0
    total = 0.0
    grad = np.empty(rho.shape[0])
    for i in range(rho.shape[0]):
        w = weight[i]
        if w == 0.0:
            grad[i] = 0.0
            continue
        total += w * (rho[i] * align[i] + _log_norm_scalar(dim, rho[i]))
        grad[i] = w * rho[i] * (align[i] - _ratio_scalar(v, rho[i]))
    return total, grad


@jit
def _nb_alignment(z, y):
    # z: (D, N) unnormalised means, y: (N, D) unit observations
    dim, n = z.shape
    out = np.empty(n)
    for i in range(n):
        dot = 0.0
        nrm = 0.0
        for d in range(dim):
            dot += z[d, i] * y[i, d]
            nrm += z[d, i] * z[d, i]
        out[i] = dot / math.sqrt(nrm) if nrm > 0.0 else 0.0
    return out


# ---------------------------------------------------------------------------
# numpy array kernels

def _np_series_sum(v, x):
    q = 0.25 * x * x
    s = np.ones_like(x)
    t = np.ones_like(x)
    active = np.ones(x.shape, dtype=bool)
    k = 0
    while active.any() and k < _MAX_SERIES:
        k += 1
        t = np.where(active, t * q / (k * (k + v)), t)
        s = np.where(active, s + t, s)
        active &= ~((t < _EPS * s) & (k > 0.5 * x))
    return s


def _np_hankel_sum(v, x):
    mu = 4.0 * v * v
    s = np.ones_like(x)
    t = np.ones_like(x)
    prev = np.ones_like(x)
    active = np.ones(x.shape, dtype=bool)
    for k in range(1, _MAX_HANKEL):
        if not active.any():
            break
        t_new = t * (-(mu - (2.0 * k - 1.0) ** 2) / (8.0 * k * x))
        at = np.abs(t_new)
        active &= at <= prev
        s = np.where(active, s + t_new, s)
        t = np.where(active, t_new, t)
        prev = np.where(active, at, prev)
        active &= at >= _EPS * np.abs(s)
    return s


def _np_debye_log(v, x):
    z = x / v
    w = np.sqrt(1.0 + z * z)
    t = 1.0 / w
    eta = w + np.log(z / (1.0 + w))
    t2 = t * t
    u1 = t * (3.0 - 5.0 * t2) / 24.0
    u2 = t2 * (81.0 - 462.0 * t2 + 385.0 * t2 * t2) / 1152.0
    u3 = t * t2 * (30375.0 - 369603.0 * t2 + 765765.0 * t2 * t2
                   - 425425.0 * t2 * t2 * t2) / 414720.0
    corr = 1.0 + u1 / v + u2 / (v * v) + u3 / (v * v * v)
    return v * eta - 0.5 * np.log(2.0 * np.pi * v) - 0.5 * np.log(w) + np.log(corr)


def _np_regime(v, x):
    reg = np.full(x.shape, 3, dtype=np.int64)
    reg[x <= 700.0] = 2
    reg[(4.0 * v * v <= x) & (reg == 3)] = 1
    reg[(4.0 * v * v <= x) & (reg == 2)] = 1
    reg[x <= max(_SERIES_MIN, 15.0 * (v + 1.0))] = 0
    return reg


def _np_log_iv(v, x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    reg = _np_regime(v, x)
    zero = x == 0.0
    ser = ((reg == 0) | (reg == 2)) & ~zero
    if ser.any():
        xs = x[ser]
        out[ser] = v * np.log(0.5 * xs) - math.lgamma(v + 1.0) + np.log(_np_series_sum(v, xs))
    han = reg == 1
    if han.any():
        xh = x[han]
        out[han] = xh - 0.5 * np.log(2.0 * np.pi * xh) + np.log(_np_hankel_sum(v, xh))
    deb = reg == 3
    if deb.any():
        out[deb] = _np_debye_log(v, x[deb])
    out[zero] = 0.0 if v == 0.0 else -np.inf
    return out


def _np_iv_ratio(v, x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    reg = _np_regime(v, x)
    zero = x == 0.0
    ser = ((reg == 0) | (reg == 2)) & ~zero
    if ser.any():
        xs = x[ser]
        out[ser] = 0.5 * xs / (v + 1.0) * _np_series_sum(v + 1.0, xs) / _np_series_sum(v, xs)
    han = (reg == 1) & (4.0 * (v + 1.0) ** 2 <= x)
    if han.any():
        xh = x[han]
        out[han] = _np_hankel_sum(v + 1.0, xh) / _np_hankel_sum(v, xh)
    rest = ~(ser | han | zero)
    if rest.any():
        xr = x[rest]
        out[rest] = np.exp(_np_log_iv(v + 1.0, xr) - _np_log_iv(v, xr))
    out[zero] = 0.0
    return out


def _np_log_norm(dim, rho):
    rho = np.asarray(rho, dtype=float)
    v = 0.5 * dim - 1.0
    out = np.empty_like(rho)
    ser = _np_regime(v, rho) == 0
    if ser.any():
        out[ser] = (v * math.log(2.0) + math.lgamma(v + 1.0)
                    - np.log(_np_series_sum(v, rho[ser])) - 0.5 * dim * LOG_2PI)
    rest = ~ser
    if rest.any():
        rr = rho[rest]
        out[rest] = v * np.log(rr) - 0.5 * dim * LOG_2PI - _np_log_iv(v, rr)
    return out


def _np_concentration_terms(dim, rho, align, weight):
    v = 0.5 * dim - 1.0
    grad = np.zeros_like(rho)
    used = weight != 0.0
    if not used.any():
        return 0.0, grad
    r = rho[used]
    w = weight[used]
    a = align[used]
    total = float(np.sum(w * (r * a + _np_log_norm(dim, r))))
    grad[used] = w * r * (a - _np_iv_ratio(v, r))
    return total, grad


def _np_alignment(z, y):
    nrm = np.sqrt(np.sum(z * z, axis=0))
    dot = np.einsum("dn,nd->n", z, y)
    out = np.zeros_like(nrm)
    ok = nrm > 0.0
    out[ok] = dot[ok] / nrm[ok]
    return out


# ---------------------------------------------------------------------------
# public dispatch

def log_iv(order, x):
    """log I_order(x) elementwise over a 1-d float array."""
    x = np.ascontiguousarray(x, dtype=float)
    if USE_NUMBA:
        return _nb_log_iv(float(order), x)
    return _np_log_iv(float(order), x)


def iv_ratio(order, x):
    """I_{order+1}(x) / I_order(x) elementwise over a 1-d float array."""
    x = np.ascontiguousarray(x, dtype=float)
    if USE_NUMBA:
        return _nb_iv_ratio(float(order), x)
    return _np_iv_ratio(float(order), x)


def log_norm_const(dim, rho):
    """Log normaliser of the von Mises-Fisher density on S^{dim-1}, per concentration."""
    rho = np.ascontiguousarray(rho, dtype=float)
    if USE_NUMBA:
        return _nb_log_norm(float(dim), rho)
    return _np_log_norm(float(dim), rho)


def concentration_terms(dim, rho, align, weight):
    """Weighted log-likelihood sum and its gradient w.r.t. log-concentration.

    ``align`` holds the mean/observation inner products and ``weight`` the
    per-observation multiplicity (labels as 0/1 or EM responsibilities).
    Returns ``(sum_i w_i log f_i, w_i rho_i (align_i - A(rho_i)))`` where A is
    the Bessel ratio of order ``dim/2 - 1``.
    """
    rho = np.ascontiguousarray(rho, dtype=float)
    align = np.ascontiguousarray(align, dtype=float)
    weight = np.ascontiguousarray(weight, dtype=float)
    if USE_NUMBA:
        return _nb_concentration_terms(float(dim), rho, align, weight)
    return _np_concentration_terms(float(dim), rho, align, weight)


def alignment(z, y):
    """Inner product of the projected mean z/|z| with each unit observation.

    ``z`` has shape (D, N) and ``y`` shape (N, D). Zero columns give 0.
    """
    z = np.ascontiguousarray(z, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    if USE_NUMBA:
        return _nb_alignment(z, y)
    return _np_alignment(z, y)
