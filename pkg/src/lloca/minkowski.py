"""Minkowski algebra with signature (+,-,-,-).

Four-vectors are arrays with trailing axis 4, matrices arrays with trailing
shape (4, 4); any leading axes are batch dimensions. Functions that sit on the
training path (products, norms, boosts, inverses) run on plain numpy arrays or
on autodiff Nodes through the same code.
"""

from __future__ import annotations

import numpy as np

from .autodiff import ops
from .autodiff.ops import METRIC, METRIC_SIGNS
from .errors import DomainError

__all__ = [
    "METRIC", "METRIC_SIGNS", "four_vector", "mink_product", "mink_norm",
    "boost_from_vector", "boost_from_velocity", "is_lorentz", "lorentz_inverse",
    "random_rotation", "random_boost", "random_lorentz", "random_boost_uniform",
    "rotation_about_z",
]


def four_vector(t, x, y, z) -> np.ndarray:
    v = np.array([t, x, y, z], dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise DomainError(f"four-vector components must be finite, got {v}")
    return v


def mink_product(x, y):
    """x0*y0 - x1*y1 - x2*y2 - x3*y3 over the trailing axis."""
    return ops.mink_product(x, y)


def mink_norm(x):
    """sqrt(|<x,x>|), the absolute-value Minkowski norm."""
    return ops.sqrt(ops.absolute(ops.mink_product(x, x)))


def boost_from_velocity(beta):
    """Pure boost with velocity ``beta`` (trailing axis 3), |beta| < 1.

    Uses (gamma-1)/beta^2 = gamma^2/(gamma+1), which stays finite as beta -> 0.
    """
    beta_v = ops.value_of(beta)
    b2_v = np.sum(beta_v * beta_v, axis=-1)
    if np.any(b2_v >= 1.0):
        raise DomainError(f"boost velocity must satisfy |beta| < 1, got |beta|^2 max {b2_v.max()}")

    b2 = ops.sum(ops.mul(beta, beta), axis=-1, keepdims=True)          # (..., 1)
    gamma = ops.pow_const(ops.sub(1.0, b2), -0.5)                      # (..., 1)
    k = ops.div(ops.mul(gamma, gamma), ops.add(gamma, 1.0))            # (..., 1)
    mgb = ops.mul(ops.neg(gamma), beta)                                # (..., 3)

    outer = ops.mul(ops.expand_dims(beta, -1), ops.expand_dims(beta, -2))  # (..., 3, 3)
    spatial = ops.add(np.eye(3), ops.mul(ops.expand_dims(k, -1), outer))   # (..., 3, 3)

    row0 = ops.expand_dims(ops.concat([gamma, mgb], axis=-1), -2)      # (..., 1, 4)
    rows = ops.concat([ops.expand_dims(mgb, -1), spatial], axis=-1)    # (..., 3, 4)
    return ops.concat([row0, rows], axis=-2)                           # (..., 4, 4)


def boost_from_vector(p):
    """Rest-frame boost B(p) of a future-directed timelike four-vector.

    B(p) @ p = (sqrt(<p,p>), 0, 0, 0) up to rounding.
    """
    p_v = ops.value_of(p)
    if np.any(p_v[..., 0] <= 0.0):
        raise DomainError("boost_from_vector needs p0 > 0")
    norm2 = ops.mink_product(p_v, p_v)
    if np.any(norm2 <= 0.0):
        raise DomainError("boost_from_vector needs a timelike vector, <p,p> > 0")
    beta = ops.div(p[..., 1:], p[..., :1])
    return boost_from_velocity(beta)


def lorentz_inverse(lam):
    """Inverse via the metric identity: g @ lam^T @ g."""
    return ops.matmul(ops.matmul(METRIC, ops.swapaxes(lam, -1, -2)), METRIC)


def is_lorentz(lam, tol: float) -> bool:
    """True iff max |lam^T g lam - g| <= tol (batched: for every matrix)."""
    lam_v = ops.value_of(lam)
    residual = np.swapaxes(lam_v, -1, -2) @ METRIC @ lam_v - METRIC
    return bool(np.max(np.abs(residual)) <= tol)


def rotation_about_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    out = np.eye(4)
    out[1, 1], out[1, 2] = c, -s
    out[2, 1], out[2, 2] = s, c
    return out


def _rotation_from_quaternion(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform spatial rotation embedded as a Lorentz matrix.

    Unit quaternions sampled by normalizing 4d Gaussians are Haar-uniform
    on SO(3).
    """
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    out = np.eye(4)
    out[1:, 1:] = _rotation_from_quaternion(q)
    return out


def random_boost(rng: np.random.Generator, sigma: float = 0.1, clip: float = 3.0) -> np.ndarray:
    """Boost with each velocity component from a truncated normal.

    Components are redrawn beyond ``clip`` standard deviations; whole vectors
    with |beta| >= 0.99 are redrawn too, keeping gamma finite for wide sigmas.
    """
    if sigma < 0.0:
        raise DomainError("sigma must be >= 0")
    if sigma == 0.0:
        return np.eye(4)
    while True:
        beta = rng.normal(0.0, sigma, size=3)
        while np.any(np.abs(beta) > clip * sigma):
            redraw = np.abs(beta) > clip * sigma
            beta[redraw] = rng.normal(0.0, sigma, size=int(redraw.sum()))
        if beta @ beta < 0.99 ** 2:
            return boost_from_velocity(beta)


def random_boost_uniform(rng: np.random.Generator, beta_max: float) -> np.ndarray:
    """Boost with uniform |beta| in [0, beta_max) and uniform direction."""
    if not 0.0 <= beta_max < 1.0:
        raise DomainError("beta_max must lie in [0, 1)")
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    return boost_from_velocity(rng.uniform(0.0, beta_max) * direction)


def random_lorentz(rng: np.random.Generator, sigma: float = 0.1, clip: float = 3.0,
                   beta_max: float | None = None) -> np.ndarray:
    """Proper orthochronous sample R @ B.

    Default boost distribution is the truncated normal; pass ``beta_max`` to
    bound the total velocity instead (used by the equivariance checks).
    """
    if beta_max is not None:
        boost = random_boost_uniform(rng, beta_max)
    else:
        boost = random_boost(rng, sigma, clip)
    return random_rotation(rng) @ boost
