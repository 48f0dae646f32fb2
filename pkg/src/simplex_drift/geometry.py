"""Simplex <-> sphere coordinates and random-direction extraction.

A point x on the simplex maps to the unit sphere through its element-wise
square root. Movement from x to x' is described in a frame where sqrt(x) is
the pole: ``theta2`` is the geodesic angle travelled and ``direction`` holds
the remaining spherical angles of the endpoint in that frame.

Two frame layouts exist. For three categories (D = 2) the pole is the last
column of the rotation and the direction is a single circular angle. For more
categories the pole is the first column and the direction has D - 1 angles,
the first D - 2 in [0, pi] and the last in [0, 2 pi).
"""
from dataclasses import dataclass

import math

import numpy as np

TWO_PI = 2.0 * np.pi
SUM_TOL = 1e-9
RENORM_TOL = 1e-6
UNIT_TOL = 1e-9
DEGENERATE_THETA = 1e-12


@dataclass(frozen=True)
class DirectionObservation:
    start: np.ndarray
    theta2: float
    direction: np.ndarray
    degenerate: bool = False

    @property
    def dim(self):
        return self.start.shape[0] - 1


def as_simplex_point(x, tol=SUM_TOL, renorm_tol=RENORM_TOL):
    """Validate proportions, renormalising small rounding error.

    Coordinates must be nonnegative. A sum within ``renorm_tol`` of one is
    rescaled to sum to one; anything further off raises ``ValueError``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] < 3:
        raise ValueError(f"simplex point needs at least 3 coordinates, got shape {x.shape}")
    total = x.sum()
    if not np.isfinite(total):
        raise ValueError("simplex point has non-finite coordinates")
    if x.min() < 0.0:
        raise ValueError(f"simplex point has negative coordinates: {x}")
    if abs(total - 1.0) > renorm_tol:
        raise ValueError(f"proportions sum to {total!r}, not 1")
    if abs(total - 1.0) > tol:
        x = x / total
    return x


def arctan_star(z1, z2):
    """Two-argument arctangent mapped to [0, 2 pi); (0, 0) maps to 0."""
    if np.ndim(z1) == 0 and np.ndim(z2) == 0:
        a = math.atan2(float(z2), float(z1))
        if a < 0.0:
            a += TWO_PI
        return 0.0 if a >= TWO_PI else a + 0.0
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    a = np.arctan2(z2, z1)
    a = np.where(a < 0.0, a + TWO_PI, a)
    # -tiny + 2 pi rounds to 2 pi, which is outside the half-open range
    a = np.where(a >= TWO_PI, 0.0, a)
    a = a + 0.0  # normalise -0.0
    return a if a.ndim else float(a)


def spherical_to_cartesian(angles):
    """Spherical angles (..., D) to unit vectors (..., D + 1).

    s_1 = cos a_1, s_d = sin a_1 ... sin a_{d-1} cos a_d, and the last
    coordinate carries sin of the final angle.
    """
    a = np.asarray(angles, dtype=float)
    dim = a.shape[-1]
    out = np.empty(a.shape[:-1] + (dim + 1,))
    sin_prod = np.ones(a.shape[:-1])
    for d in range(dim):
        out[..., d] = sin_prod * np.cos(a[..., d])
        sin_prod = sin_prod * np.sin(a[..., d])
    out[..., dim] = sin_prod
    return out


def cartesian_to_spherical(s, check=True):
    """Unit vectors (..., D + 1) to spherical angles (..., D).

    Where a tail of coordinates is identically zero the corresponding angle
    and all later ones are 0.
    """
    s = np.asarray(s, dtype=float)
    if check:
        nrm = np.linalg.norm(s, axis=-1)
        if np.any(np.abs(nrm - 1.0) > UNIT_TOL):
            raise ValueError("cartesian_to_spherical expects unit vectors")
    dim = s.shape[-1] - 1
    out = np.empty(s.shape[:-1] + (dim,))
    # tail[d] = ||s[d+1:]||, computed from the back to avoid cancellation
    tail = np.sqrt(np.cumsum((s * s)[..., ::-1], axis=-1)[..., ::-1])
    for d in range(dim - 1):
        out[..., d] = np.arctan2(tail[..., d + 1], s[..., d])
    out[..., dim - 1] = arctan_star(s[..., dim - 1], s[..., dim])
    return out


def _check_angles(angles, dim):
    a = np.asarray(angles, dtype=float).reshape(-1)
    if a.shape[0] != dim:
        raise ValueError(f"expected {dim} direction angle(s), got {a.shape[0]}")
    if np.any(a[:-1] < 0.0) or np.any(a[:-1] > np.pi):
        raise ValueError("leading direction angles must lie in [0, pi]")
    if a[-1] < 0.0 or a[-1] >= TWO_PI:
        raise ValueError("last direction angle must lie in [0, 2 pi)")
    return a


def rotation_2d(x):
    """3x3 frame whose last column is sqrt(x)."""
    x = as_simplex_point(x)
    if x.shape[0] != 3:
        raise ValueError("rotation_2d needs a point on the 2-simplex")
    r = np.sqrt(x)
    theta = np.arctan2(np.hypot(r[0], r[1]), r[2])
    phi = arctan_star(r[0], r[1])
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(phi), np.sin(phi)
    return np.array([
        [ct * cp, -sp, st * cp],
        [ct * sp, cp, st * sp],
        [-st, 0.0, ct],
    ])


def rotation_highdim(x):
    """(D + 1)x(D + 1) frame whose first column is sqrt(x), D > 2.

    Column 2 moves the first angle by pi/2; column d >= 3 sets the first d - 2
    angles to pi/2 and moves angle d - 1 by pi/2.
    """
    x = as_simplex_point(x)
    dim = x.shape[0] - 1
    if dim < 3:
        raise ValueError("rotation_highdim needs D > 2; use rotation_2d")
    a = cartesian_to_spherical(np.sqrt(x), check=False)
    b = np.tile(a, (dim, 1))
    b[0, 0] += np.pi / 2
    for d in range(3, dim + 2):
        b[d - 2, : d - 2] = np.pi / 2
        b[d - 2, d - 2] += np.pi / 2
    cols = np.empty((dim + 1, dim + 1))
    cols[0] = np.sqrt(x)
    cols[1:] = spherical_to_cartesian(b)
    return cols.T


def rotation_matrix(x):
    x = np.asarray(x, dtype=float)
    return rotation_2d(x) if x.shape[0] == 3 else rotation_highdim(x)


def _frame_coords(theta2, direction, dim):
    # endpoint expressed in the rotated frame
    if dim == 2:
        y = float(np.asarray(direction).reshape(-1)[0])
        st = np.sin(theta2)
        return np.array([st * np.cos(y), st * np.sin(y), np.cos(theta2)])
    return spherical_to_cartesian(np.concatenate([[theta2], np.asarray(direction, float).reshape(-1)]))


def extract_direction(x, x_next):
    """Random direction of the move x -> x_next.

    The frame is applied through its transpose (its inverse), which maps
    sqrt(x) to the pole. ``theta2`` lies in [0, pi/2]; a move of zero length
    gives a degenerate observation with all-zero direction.
    """
    x = as_simplex_point(x)
    x_next = as_simplex_point(x_next)
    if x.shape != x_next.shape:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {x_next.shape[0]} coordinates")
    dim = x.shape[0] - 1
    rot = rotation_matrix(x)
    t = rot.T @ np.sqrt(x_next)
    t /= np.linalg.norm(t)
    if dim == 2:
        theta2 = float(np.arctan2(np.hypot(t[0], t[1]), t[2]))
        direction = np.array([arctan_star(t[0], t[1])])
    else:
        a = cartesian_to_spherical(t, check=False)
        theta2 = float(a[0])
        direction = a[1:]
    theta2 = min(theta2, np.pi / 2)
    if theta2 < DEGENERATE_THETA:
        return DirectionObservation(x, 0.0, np.zeros(dim - 1 if dim > 2 else 1), True)
    return DirectionObservation(x, theta2, direction, False)


def reconstruct_endpoint(x, theta2, direction):
    """Inverse of :func:`extract_direction`: the simplex point reached from x."""
    x = as_simplex_point(x)
    dim = x.shape[0] - 1
    _check_angles(direction, 1 if dim == 2 else dim - 1)
    if not 0.0 <= theta2 <= np.pi / 2:
        raise ValueError("theta2 must lie in [0, pi/2]")
    s = rotation_matrix(x) @ _frame_coords(theta2, direction, dim)
    p = s * s
    return p / p.sum()


def geodesic_point(x, theta2, direction, t):
    """Point at fraction t along the great circle from sqrt(x) to the endpoint."""
    x = as_simplex_point(x)
    dim = x.shape[0] - 1
    _check_angles(direction, 1 if dim == 2 else dim - 1)
    return rotation_matrix(x) @ _frame_coords(t * theta2, direction, dim)


def direction_to_unit(direction, dim):
    """Direction angles to the unit vector the von Mises(-Fisher) model sees.

    For D = 2 this is (cos y, sin y); for D > 2 the D - 1 angles map to a
    point on S^{D-1} in R^D.
    """
    a = np.asarray(direction, dtype=float)
    if dim == 2:
        a = a.reshape(a.shape[:-1]) if a.ndim and a.shape[-1] == 1 else a
        return np.stack([np.cos(a), np.sin(a)], axis=-1)
    return spherical_to_cartesian(a)


def unit_to_direction(u):
    """Inverse of :func:`direction_to_unit`; D = 2 returns shape (..., 1)."""
    u = np.asarray(u, dtype=float)
    u = u / np.linalg.norm(u, axis=-1, keepdims=True)
    return cartesian_to_spherical(u, check=False)


_CIRCULAR_2D = {
    0: "push away from {c3}",
    1: "pull toward {c2}",
    2: "pull toward {c3}",
    3: "push away from {c2}",
}


def _nearest_quarter(angle):
    return int(np.round(np.mod(angle, TWO_PI) / (np.pi / 2))) % 4


def label_direction(direction, category_names):
    """Plain-language reading of each direction angle.

    Angles are snapped to the nearest cardinal value. For three categories the
    single angle reads 0: push away from category 3, pi/2: pull toward
    category 2, pi: pull toward category 3, 3pi/2: push away from category 2.
    For more categories angle d in [0, pi] reads 0: push away from category
    d, pi/2: neutral, pi: pull toward category d; the last, circular angle
    pairs category D - 1 (cos) with the highest category (sin).
    """
    names = list(category_names)
    y = np.asarray(direction, dtype=float).reshape(-1)
    dim = len(names) - 1
    expected = 1 if dim == 2 else dim - 1
    if dim < 2 or y.shape[0] != expected:
        raise ValueError(
            f"{len(names)} category names need {expected} direction angle(s), got {y.shape[0]}")
    if dim == 2:
        return [_CIRCULAR_2D[_nearest_quarter(y[0])].format(c2=names[1], c3=names[2])]
    labels = []
    for d in range(dim - 2):
        q = int(np.round(np.clip(y[d], 0.0, np.pi) / (np.pi / 2)))
        labels.append([f"push away from {names[d]}",
                       f"neutral: supports change in categories above {names[d]}",
                       f"pull toward {names[d]}"][q])
    low, top = names[dim - 2], names[dim]
    labels.append([f"push away from {low}", f"pull toward {top}",
                   f"pull toward {low}", f"push away from {top}"][_nearest_quarter(y[-1])])
    return labels
