"""Local reference frames from three four-vectors.

Two constructions of the same frame:

* :func:`frame_pd` boosts into the rest frame of the first vector and builds
  the rotation by 3d Gram-Schmidt on the boosted spatial parts (L = R B).
* :func:`frame_gs4` orthonormalizes all three vectors directly with the
  indefinite-metric Gram-Schmidt procedure and completes the tetrad with the
  totally antisymmetric tensor, then assembles rows from the covectors with
  the row label raised so the result lands in the proper orthochronous
  component (det L = +1).

Both return matrices L with L g L^T = g that pick up a right factor of
Lambda^{-1} when all inputs are transformed by Lambda. Every step runs on
numpy arrays or autodiff Nodes, so gradients reach the network that predicted
the input vectors. Batched inputs (leading axes) are supported throughout.
"""

from __future__ import annotations

import numpy as np

from .autodiff import ops
from .autodiff.ops import METRIC_SIGNS
from .errors import DegenerateInput
from .minkowski import boost_from_vector, mink_norm, mink_product

__all__ = ["gram_schmidt3", "frame_pd", "frame_gs4", "frame_so3", "levi_civita_u3"]

NORM_EPS = 1e-15          # regularizer inside normalizations
COLLINEAR_RTOL = 1e-10    # relative residual below which inputs are degenerate

_E0_ROW = np.array([[1.0, 0.0, 0.0, 0.0]])


def _dot3(a, b):
    return ops.sum(ops.mul(a, b), axis=-1, keepdims=True)


def _norm3(a):
    return ops.sqrt(_dot3(a, a))


def gram_schmidt3(w1, w2):
    """Orthonormal right-handed triad from two independent 3-vectors."""
    w1_v, w2_v = ops.value_of(w1), ops.value_of(w2)
    n1 = np.linalg.norm(w1_v, axis=-1)
    n2 = np.linalg.norm(w2_v, axis=-1)
    if np.any(n1 == 0.0) or np.any(n2 == 0.0):
        raise DegenerateInput("gram_schmidt3 needs nonzero input vectors")
    u1_v = w1_v / n1[..., None]
    residual = w2_v - u1_v * np.sum(u1_v * w2_v, axis=-1, keepdims=True)
    if np.any(np.linalg.norm(residual, axis=-1) < COLLINEAR_RTOL * n2):
        raise DegenerateInput("gram_schmidt3 inputs are collinear")

    u1 = ops.div(w1, ops.add(_norm3(w1), NORM_EPS))
    ortho = ops.sub(w2, ops.mul(u1, _dot3(u1, w2)))
    u2 = ops.div(ortho, ops.add(_norm3(ortho), NORM_EPS))
    u3 = ops.cross_product(u1, u2)
    return u1, u2, u3


def _rotation_from_triad(u1, u2, u3):
    """Embed the rotation with rows u1, u2, u3 as a Lorentz matrix."""
    triad = ops.stack([u1, u2, u3], axis=-2)                       # (..., 3, 3)
    batch = ops.value_of(triad).shape[:-2]
    col0 = np.zeros((*batch, 3, 1))
    rows = ops.concat([col0, triad], axis=-1)                      # (..., 3, 4)
    row0 = np.broadcast_to(_E0_ROW, (*batch, 1, 4))
    return ops.concat([row0, rows], axis=-2)                       # (..., 4, 4)


def _apply(lam, v):
    return ops.reshape(
        ops.matmul(lam, ops.expand_dims(v, -1)), ops.value_of(v).shape
    )


def frame_pd(v0, v1, v2):
    """Frame via rest-frame boost plus 3d Gram-Schmidt (L = R B)."""
    boost = boost_from_vector(v0)
    w1 = _apply(boost, v1)
    w2 = _apply(boost, v2)
    u1, u2, u3 = gram_schmidt3(w1[..., 1:], w2[..., 1:])
    return ops.matmul(_rotation_from_triad(u1, u2, u3), boost)


def _mink_normalize(v):
    return ops.div(v, ops.add(ops.expand_dims(mink_norm(v), -1), NORM_EPS))


def _project_out(v, u):
    coeff = ops.div(mink_product(v, u), mink_product(u, u))
    return ops.sub(v, ops.mul(u, ops.expand_dims(coeff, -1)))


def levi_civita_u3(u0, u1, u2):
    """Tetrad completion: u3^mu = g^{mu nu} eps_{nu rho sigma kappa} u0 u1 u2."""
    return ops.mul(ops.eps_contract(u0, u1, u2), METRIC_SIGNS)


def frame_gs4(v0, v1, v2):
    """Frame via Gram-Schmidt directly in Minkowski space."""
    # Preconditions and degeneracy match the polar-decomposition route.
    boost = boost_from_vector(ops.value_of(v0))
    b1 = boost @ ops.value_of(v1)[..., None]
    b2 = boost @ ops.value_of(v2)[..., None]
    w1_v, w2_v = b1[..., 1:, 0], b2[..., 1:, 0]
    n2 = np.linalg.norm(w2_v, axis=-1)
    u1_v = w1_v / np.linalg.norm(w1_v, axis=-1, keepdims=True)
    residual = w2_v - u1_v * np.sum(u1_v * w2_v, axis=-1, keepdims=True)
    if np.any(np.linalg.norm(residual, axis=-1) < COLLINEAR_RTOL * n2):
        raise DegenerateInput("frame_gs4 inputs are collinear after boosting")

    a0 = _mink_normalize(v0)
    a1 = _mink_normalize(v1)
    a2 = _mink_normalize(v2)
    u0 = a0
    u1 = _mink_normalize(_project_out(a1, u0))
    u2 = _mink_normalize(_project_out(_project_out(a2, u0), u1))
    u3 = levi_civita_u3(u0, u1, u2)
    # The completion is orthonormal analytically; renormalize defensively.
    u3 = _mink_normalize(u3)

    tetrad = ops.stack([u0, u1, u2, u3], axis=-2)                  # rows u_a
    # Rows are covectors u_a^T g with the row label raised: L = g U g.
    return ops.mul(ops.mul(tetrad, METRIC_SIGNS[:, None]), METRIC_SIGNS)


def frame_so3(v1, v2):
    """Rotation-only frame from the spatial parts (the v0 = e_t special case)."""
    u1, u2, u3 = gram_schmidt3(v1[..., 1:], v2[..., 1:])
    return _rotation_from_triad(u1, u2, u3)
