"""Tensor representations of the Lorentz group on flat feature vectors.

A feature vector is a direct sum of order-n tensor blocks; a :class:`RepSpec`
declares that layout. Order 0 blocks are invariant scalars, order 1 blocks
transform with the matrix itself, order n blocks with its n-fold Kronecker
power. Block order inside a spec is significant and preserved.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import ops
from .autodiff.ops import METRIC_SIGNS
from .errors import DimensionError

DEFAULT_MAX_ORDER = 2


@dataclass(frozen=True)
class RepSpec:
    """Ordered direct sum of (tensor_order, multiplicity) blocks."""

    blocks: tuple[tuple[int, int], ...]

    def __post_init__(self):
        for order, mult in self.blocks:
            if order < 0 or mult <= 0:
                raise DimensionError(f"invalid rep block (order={order}, multiplicity={mult})")

    @classmethod
    def parse(cls, text: str) -> "RepSpec":
        """Parse the canonical encoding, e.g. "8x0+2x1" = 8 scalars + 2 vectors."""
        blocks = []
        for chunk in text.replace(" ", "").split("+"):
            try:
                mult, order = chunk.split("x")
                blocks.append((int(order), int(mult)))
            except ValueError as exc:
                raise DimensionError(f"cannot parse rep spec {text!r}") from exc
        return cls(tuple(blocks))

    def __str__(self) -> str:
        return "+".join(f"{mult}x{order}" for order, mult in self.blocks)

    @property
    def dimension(self) -> int:
        return sum(mult * 4 ** order for order, mult in self.blocks)

    def block_slices(self) -> list[tuple[int, int, slice]]:
        """(order, multiplicity, channel slice) per block, in declared order."""
        out, offset = [], 0
        for order, mult in self.blocks:
            width = mult * 4 ** order
            out.append((order, mult, slice(offset, offset + width)))
            offset += width
        return out

    @property
    def is_scalar_only(self) -> bool:
        return all(order == 0 for order, _ in self.blocks)

    def scalar_mask(self) -> np.ndarray:
        mask = np.zeros(self.dimension, dtype=bool)
        for order, _, sl in self.block_slices():
            if order == 0:
                mask[sl] = True
        return mask


@dataclass
class TensorFeature:
    """A flat feature vector paired with the spec describing how it transforms."""

    values: np.ndarray
    spec: RepSpec = field(repr=False)

    def __post_init__(self):
        if ops.value_of(self.values).shape[-1] != self.spec.dimension:
            raise DimensionError(
                f"feature length {ops.value_of(self.values).shape[-1]} "
                f"!= spec dimension {self.spec.dimension}"
            )

    def transform(self, lam) -> "TensorFeature":
        return TensorFeature(apply_rep(lam, self.values, self.spec), self.spec)


def _check_order(order: int, max_order: int) -> None:
    if order > max_order:
        raise DimensionError(f"tensor order {order} exceeds configured maximum {max_order}")


def _kron(a, b):
    """Kronecker product over the trailing two axes, batched."""
    p, q = ops.value_of(a).shape[-2:]
    r, s = ops.value_of(b).shape[-2:]
    a_e = ops.expand_dims(ops.expand_dims(a, -1), -3)  # (..., p, 1, q, 1)
    b_e = ops.expand_dims(ops.expand_dims(b, -2), -4)  # (..., 1, r, 1, s)
    prod = ops.mul(a_e, b_e)                           # (..., p, r, q, s)
    batch = ops.value_of(prod).shape[:-4]
    return ops.reshape(prod, (*batch, p * r, q * s))


def _order_block_matrix(lam, order: int):
    if order == 0:
        batch = ops.value_of(lam).shape[:-2]
        return np.broadcast_to(np.eye(1), (*batch, 1, 1)).copy() if batch else np.eye(1)
    out = lam
    for _ in range(order - 1):
        out = _kron(out, lam)
    return out


def rep_matrix(lam, spec: RepSpec, max_order: int = DEFAULT_MAX_ORDER):
    """Dense block-diagonal matrix of the direct-sum representation."""
    batch = ops.value_of(lam).shape[:-2]
    dim = spec.dimension
    rows = []
    offset = 0
    for order, mult, _ in spec.block_slices():
        _check_order(order, max_order)
        block = _order_block_matrix(lam, order)
        width = 4 ** order
        for _ in range(mult):
            left = np.zeros((*batch, width, offset))
            right = np.zeros((*batch, width, dim - offset - width))
            rows.append(ops.concat([left, block, right], axis=-1))
            offset += width
    return ops.concat(rows, axis=-2)


def _transform_order_n(lam, values, order: int):
    """Contract each of the n tensor axes of (..., mult, 4, ..., 4) with lam."""
    lam_t = ops.swapaxes(lam, -1, -2)
    # Align lam against the value's extra (multiplicity and tensor) axes.
    extra = ops.value_of(values).ndim - ops.value_of(lam).ndim
    for _ in range(extra):
        lam_t = ops.expand_dims(lam_t, -3)
    out = values
    for axis_from_end in range(1, order + 1):
        if axis_from_end > 1:
            out = ops.swapaxes(out, -1, -axis_from_end)
        out = ops.matmul(out, lam_t)
        if axis_from_end > 1:
            out = ops.swapaxes(out, -1, -axis_from_end)
    return out


def apply_rep(lam, values, spec: RepSpec, max_order: int = DEFAULT_MAX_ORDER):
    """Apply the representation blockwise, without materializing 4^n matrices.

    ``lam`` has shape (..., 4, 4) and ``values`` (..., spec.dimension); batch
    axes broadcast.
    """
    vshape = ops.value_of(values).shape
    if vshape[-1] != spec.dimension:
        raise DimensionError(f"feature length {vshape[-1]} != spec dimension {spec.dimension}")
    if spec.is_scalar_only:
        return values
    batch = vshape[:-1]
    parts = []
    for order, mult, sl in spec.block_slices():
        _check_order(order, max_order)
        chunk = values[..., sl]
        if order == 0:
            parts.append(chunk)
            continue
        shaped = ops.reshape(chunk, (*batch, mult) + (4,) * order)
        moved = _transform_order_n(lam, shaped, order)
        parts.append(ops.reshape(moved, (*batch, mult * 4 ** order)))
    return ops.concat(parts, axis=-1)


def rep_metric(spec: RepSpec, max_order: int = DEFAULT_MAX_ORDER) -> np.ndarray:
    """Diagonal sign matrix G with G @ G = I: the metric of the direct sum.

    Scalar slots contribute +1, vector blocks the Minkowski signs, order-n
    blocks their n-fold Kronecker products.
    """
    signs = []
    for order, mult, _ in spec.block_slices():
        _check_order(order, max_order)
        block = np.ones(1)
        for _ in range(order):
            block = np.kron(block, METRIC_SIGNS)
        signs.extend([block] * mult)
    return np.diag(np.concatenate(signs))
