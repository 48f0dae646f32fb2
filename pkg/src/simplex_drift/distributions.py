"""Modified Bessel functions, von Mises and von Mises-Fisher distributions."""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import TWO_PI, arctan_star

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class VonMisesParams:
    mean: float
    concentration: float

    def __post_init__(self):
        if not self.concentration >= 0.0:
            raise ValueError("von Mises concentration must be nonnegative")


@dataclass(frozen=True)
class VonMisesFisherParams:
    mean: np.ndarray
    concentration: float

    def __post_init__(self):
        m = np.asarray(self.mean, dtype=float)
        if m.ndim != 1 or m.shape[0] < 2:
            raise ValueError("von Mises-Fisher mean must be a vector of length >= 2")
        if abs(np.linalg.norm(m) - 1.0) > 1e-9:
            raise ValueError("von Mises-Fisher mean must be a unit vector")
        if not self.concentration >= 0.0:
            raise ValueError("von Mises-Fisher concentration must be nonnegative")
        object.__setattr__(self, "mean", m)

    @property
    def dim(self):
        return self.mean.shape[0]


def _order(order):
    order = float(order)
    if order < 0.0:
        if order != round(order):
            raise ValueError(f"negative non-integer Bessel order {order} is not supported")
        order = -order  # I_{-n} = I_n for integer n
    return order


def _argument(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0) or np.any(np.isnan(x)):
        raise ValueError("Bessel argument must be nonnegative")
    return x


def _apply(fn, order, x):
    x = _argument(x)
    out = fn(_order(order), x.reshape(-1)).reshape(x.shape)
    return out if out.ndim else float(out)


def log_bessel_i(order, x):
    """log I_order(x)."""
    return _apply(kernels.log_iv, order, x)


def bessel_i(order, x):
    """Modified Bessel function of the first kind, I_order(x).

    Overflows to inf for very large x; use :func:`bessel_ie` or
    :func:`log_bessel_i` there.
    """
    return np.exp(log_bessel_i(order, x))


def bessel_ie(order, x):
    """Exponentially scaled I_order(x) * exp(-x)."""
    x = _argument(x)
    return np.exp(log_bessel_i(order, x) - x)


def bessel_ratio(order, x):
    """I_{order+1}(x) / I_order(x); lies in [0, 1) for order >= 0.

    With the integer-order identity I_{-1} = I_1, the ratio I_{-1}/I_0 that
    appears in the circular gradients is ``bessel_ratio(0, x)``.
    """
    order = float(order)
    if order < 0.0:
        raise ValueError("bessel_ratio needs order >= 0")
    return _apply(kernels.iv_ratio, order, x)


def vmf_log_normalizer(dim, concentration):
    """log C_dim(rho); at rho = 0 this is minus the log surface area of S^{dim-1}."""
    rho = np.asarray(concentration, dtype=float)
    if np.any(rho < 0.0):
        raise ValueError("concentration must be nonnegative")
    out = kernels.log_norm_const(dim, rho.reshape(-1)).reshape(rho.shape)
    return out if out.ndim else float(out)


def vm_logpdf(y, mean, concentration):
    """von Mises log-density exp(rho cos(y - m)) / (2 pi I_0(rho)), broadcasting."""
    y, mean, rho = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (y, mean, concentration)))
    if np.any(rho < 0.0):
        raise ValueError("concentration must be nonnegative")
    out = rho * np.cos(y - mean) + vmf_log_normalizer(2, rho)
    return out if out.ndim else float(out)


def vmf_logpdf(s, mean, concentration):
    """von Mises-Fisher log-density on S^{D-1} with respect to surface measure."""
    s = np.asarray(s, dtype=float)
    mean = np.asarray(mean, dtype=float)
    if np.any(np.abs(np.linalg.norm(s, axis=-1) - 1.0) > 1e-9):
        raise ValueError("vmf_logpdf expects unit vectors")
    if np.any(np.abs(np.linalg.norm(mean, axis=-1) - 1.0) > 1e-9):
        raise ValueError("vmf_logpdf expects a unit mean")
    dim = s.shape[-1]
    rho = np.asarray(concentration, dtype=float)
    out = rho * np.sum(s * mean, axis=-1) + vmf_log_normalizer(dim, rho)
    return out if np.ndim(out) else float(out)


def vm_sample(mean, concentration, rng, size=None):
    """Best-Fisher wrapped-Cauchy rejection sampler, output in [0, 2 pi)."""
    kappa = float(concentration)
    if kappa < 0.0:
        raise ValueError("concentration must be nonnegative")
    n = 1 if size is None else int(np.prod(size))
    if kappa < 1e-8:
        out = rng.uniform(0.0, TWO_PI, n)
    elif kappa > 1e6:
        out = np.mod(mean + rng.normal(0.0, 1.0 / np.sqrt(kappa), n), TWO_PI)
    else:
        s = 0.5 / kappa
        r = s + np.sqrt(1.0 + s * s)
        out = np.empty(n)
        todo = np.arange(n)
        while todo.size:
            m = todo.size
            u1 = rng.random(m)
            u2 = rng.random(m)
            u3 = rng.random(m)
            z = np.cos(np.pi * u1)
            f = (1.0 + r * z) / (r + z)
            c = kappa * (r - f)
            ok = (c * (2.0 - c) - u2 > 0.0) | (np.log(c / u2) + 1.0 - c >= 0.0)
            theta = np.sign(u3 - 0.5) * np.arccos(np.clip(f, -1.0, 1.0))
            out[todo[ok]] = theta[ok]
            todo = todo[~ok]
        out = np.mod(mean + out, TWO_PI)
    out = np.where(out >= TWO_PI, 0.0, out)
    return float(out[0]) if size is None else out.reshape(size)


def _tangent_uniform(mean, rng, n):
    v = rng.standard_normal((n, mean.shape[0]))
    v -= np.outer(v @ mean, mean)
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def vmf_sample(mean, concentration, rng, size=None):
    """Wood's rejection sampler for the von Mises-Fisher distribution.

    Draws the cosine w with the mean, then a uniform tangent direction.
    Returns an (n, D) array, or (D,) when ``size`` is None.
    """
    mean = np.asarray(mean, dtype=float)
    mean = mean / np.linalg.norm(mean)
    kappa = float(concentration)
    if kappa < 0.0:
        raise ValueError("concentration must be nonnegative")
    n = 1 if size is None else int(size)
    p = mean.shape[0]
    b = (p - 1.0) / (2.0 * kappa + np.sqrt(4.0 * kappa * kappa + (p - 1.0) ** 2))
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + (p - 1.0) * np.log(1.0 - x0 * x0)
    w = np.empty(n)
    todo = np.arange(n)
    while todo.size:
        m = todo.size
        z = rng.beta(0.5 * (p - 1.0), 0.5 * (p - 1.0), m)
        cand = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        u = rng.random(m)
        ok = kappa * cand + (p - 1.0) * np.log(1.0 - x0 * cand) - c >= np.log(u)
        w[todo[ok]] = cand[ok]
        todo = todo[~ok]
    v = _tangent_uniform(mean, rng, n)
    out = w[:, None] * mean + np.sqrt(np.clip(1.0 - w * w, 0.0, None))[:, None] * v
    out /= np.linalg.norm(out, axis=1, keepdims=True)
    return out[0] if size is None else out


def circular_mean_of(angles):
    """Resultant-vector mean direction (no undefined-mean check)."""
    a = np.asarray(angles, dtype=float)
    return arctan_star(np.cos(a).mean(), np.sin(a).mean())
