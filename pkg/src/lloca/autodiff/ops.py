"""Differentiable primitives with numpy fallbacks.

Every function here accepts either plain numpy arrays or :class:`Node`
instances. With array inputs it simply computes the numpy result, so the
geometry code written against this module runs identically inside and outside
a recorded forward pass. With at least one Node input it builds a graph node
carrying an exact vector-Jacobian product.
"""

from __future__ import annotations

import builtins
import itertools

import numpy as np
from scipy.special import erf as _erf

from ..errors import ShapeError
from .engine import Node, _as_value

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)

# Minkowski metric signature (+,-,-,-) as a sign vector and dense matrix.
METRIC_SIGNS = np.array([1.0, -1.0, -1.0, -1.0])
METRIC = np.diag(METRIC_SIGNS)

# Totally antisymmetric rank-4 tensor with eps[0,1,2,3] = +1.
def _build_eps4() -> np.ndarray:
    eps = np.zeros((4, 4, 4, 4))
    for perm in itertools.permutations(range(4)):
        inversions = builtins.sum(
            1 for i in range(4) for j in range(i + 1, 4) if perm[i] > perm[j]
        )
        eps[perm] = -1.0 if inversions % 2 else 1.0
    return eps


_EPS4 = _build_eps4()


def is_node(x) -> bool:
    return isinstance(x, Node)

def value_of(x) -> np.ndarray:
    return x.value if isinstance(x, Node) else _as_value(x)

def as_node(x) -> Node:
    return x if isinstance(x, Node) else Node(_as_value(x))


def _make(value, parents, vjps):
    """Create a graph node, pruning the backward closure of constant inputs."""
    if any(p.requires_grad for p in parents):
        return Node(value, tuple(parents), tuple(vjps), requires_grad=True)
    return Node(value)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise arithmetic
# ---------------------------------------------------------------------------

def add(a, b):
    if not (is_node(a) or is_node(b)):
        return np.add(a, b)
    a, b = as_node(a), as_node(b)
    return _make(a.value + b.value, (a, b), (
        lambda g, s=a.value.shape: _unbroadcast(g, s),
        lambda g, s=b.value.shape: _unbroadcast(g, s),
    ))


def sub(a, b):
    if not (is_node(a) or is_node(b)):
        return np.subtract(a, b)
    a, b = as_node(a), as_node(b)
    return _make(a.value - b.value, (a, b), (
        lambda g, s=a.value.shape: _unbroadcast(g, s),
        lambda g, s=b.value.shape: _unbroadcast(-g, s),
    ))


def mul(a, b):
    if not (is_node(a) or is_node(b)):
        return np.multiply(a, b)
    a, b = as_node(a), as_node(b)
    return _make(a.value * b.value, (a, b), (
        lambda g, o=b.value, s=a.value.shape: _unbroadcast(g * o, s),
        lambda g, o=a.value, s=b.value.shape: _unbroadcast(g * o, s),
    ))


def div(a, b):
    if not (is_node(a) or is_node(b)):
        return np.divide(a, b)
    a, b = as_node(a), as_node(b)
    out = a.value / b.value
    return _make(out, (a, b), (
        lambda g, o=b.value, s=a.value.shape: _unbroadcast(g / o, s),
        lambda g, o=b.value, v=out, s=b.value.shape: _unbroadcast(-g * v / o, s),
    ))


def neg(a):
    if not is_node(a):
        return np.negative(a)
    return _make(-a.value, (a,), (lambda g: -g,))


def pow_const(a, exponent: float):
    if not is_node(a):
        return np.power(a, exponent)
    return _make(a.value ** exponent, (a,), (
        lambda g, v=a.value, e=exponent: g * e * v ** (e - 1.0),
    ))


def sqrt(a):
    if not is_node(a):
        return np.sqrt(a)
    out = np.sqrt(a.value)
    return _make(out, (a,), (lambda g, v=out: g * (0.5 / v),))


def exp(a):
    if not is_node(a):
        return np.exp(a)
    out = np.exp(a.value)
    return _make(out, (a,), (lambda g, v=out: g * v,))


def log(a):
    if not is_node(a):
        return np.log(a)
    return _make(np.log(a.value), (a,), (lambda g, v=a.value: g / v,))


def absolute(a):
    # Subgradient convention: d|x|/dx = sign(x), zero at x = 0.
    if not is_node(a):
        return np.abs(a)
    return _make(np.abs(a.value), (a,), (lambda g, v=a.value: g * np.sign(v),))


# ---------------------------------------------------------------------------
# reductions and shape manipulation
# ---------------------------------------------------------------------------

def sum(a, axis=None, keepdims=False):  # noqa: A001 - numpy-style name
    if not is_node(a):
        return np.sum(a, axis=axis, keepdims=keepdims)
    out = np.sum(a.value, axis=axis, keepdims=keepdims)

    def vjp(g, shape=a.value.shape, axis=axis, keepdims=keepdims):
        if axis is not None and not keepdims:
            axes = axis if isinstance(axis, tuple) else (axis,)
            g = np.expand_dims(g, axes)
        return np.broadcast_to(g, shape)

    return _make(out, (a,), (vjp,))


def mean(a, axis=None, keepdims=False):
    size = value_of(a).size if axis is None else np.prod(
        [value_of(a).shape[ax] for ax in (axis if isinstance(axis, tuple) else (axis,))]
    )
    return div(sum(a, axis=axis, keepdims=keepdims), float(size))


def reshape(a, shape):
    if not is_node(a):
        return np.reshape(a, shape)
    return _make(a.value.reshape(shape), (a,), (
        lambda g, s=a.value.shape: g.reshape(s),
    ))


def transpose(a, axes):
    if not is_node(a):
        return np.transpose(a, axes)
    inv = tuple(np.argsort(axes))
    return _make(np.transpose(a.value, axes), (a,), (
        lambda g, inv=inv: np.transpose(g, inv),
    ))


def swapaxes(a, ax1, ax2):
    if not is_node(a):
        return np.swapaxes(a, ax1, ax2)
    return _make(np.swapaxes(a.value, ax1, ax2), (a,), (
        lambda g, ax1=ax1, ax2=ax2: np.swapaxes(g, ax1, ax2),
    ))


def expand_dims(a, axis):
    if not is_node(a):
        return np.expand_dims(a, axis)
    return _make(np.expand_dims(a.value, axis), (a,), (
        lambda g, s=a.value.shape: g.reshape(s),
    ))


def broadcast_to(a, shape):
    if not is_node(a):
        return np.broadcast_to(a, shape)
    return _make(np.broadcast_to(a.value, shape), (a,), (
        lambda g, s=a.value.shape: _unbroadcast(g, s),
    ))


def getitem(a, idx):
    if not is_node(a):
        return a[idx]
    out = a.value[idx]

    def vjp(g, shape=a.value.shape, idx=idx):
        buf = np.zeros(shape)
        buf[idx] += g
        return buf

    return _make(out, (a,), (vjp,))


def concat(parts, axis=-1):
    if not any(is_node(p) for p in parts):
        return np.concatenate(parts, axis=axis)
    parts = [as_node(p) for p in parts]
    values = [p.value for p in parts]
    out = np.concatenate(values, axis=axis)
    sizes = [v.shape[axis] for v in values]
    offsets = np.cumsum([0] + sizes)

    def make_vjp(i):
        lo, hi = offsets[i], offsets[i + 1]

        def vjp(g):
            index = [slice(None)] * g.ndim
            index[axis] = slice(lo, hi)
            return g[tuple(index)]

        return vjp

    return _make(out, tuple(parts), tuple(make_vjp(i) for i in range(len(parts))))


def stack(parts, axis=0):
    if not any(is_node(p) for p in parts):
        return np.stack(parts, axis=axis)
    parts = [as_node(p) for p in parts]
    out = np.stack([p.value for p in parts], axis=axis)

    def make_vjp(i):
        return lambda g: np.take(g, i, axis=axis)

    return _make(out, tuple(parts), tuple(make_vjp(i) for i in range(len(parts))))


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------

def matmul(a, b):
    av, bv = value_of(a), value_of(b)
    if av.ndim < 2 or bv.ndim < 2:
        raise ShapeError(f"matmul needs >=2-d operands, got {av.shape} and {bv.shape}")
    if av.shape[-1] != bv.shape[-2]:
        raise ShapeError(f"matmul inner dimensions differ: {av.shape} @ {bv.shape}")
    if not (is_node(a) or is_node(b)):
        return np.matmul(av, bv)
    a, b = as_node(a), as_node(b)
    return _make(np.matmul(av, bv), (a, b), (
        lambda g, o=bv, s=av.shape: _unbroadcast(np.matmul(g, np.swapaxes(o, -1, -2)), s),
        lambda g, o=av, s=bv.shape: _unbroadcast(np.matmul(np.swapaxes(o, -1, -2), g), s),
    ))


def cross_product(a, b):
    """3-vector cross product over the trailing axis."""
    if not (is_node(a) or is_node(b)):
        return np.cross(a, b)
    a, b = as_node(a), as_node(b)
    return _make(np.cross(a.value, b.value), (a, b), (
        lambda g, o=b.value, s=a.value.shape: _unbroadcast(np.cross(o, g), s),
        lambda g, o=a.value, s=b.value.shape: _unbroadcast(np.cross(g, o), s),
    ))


def mink_product(x, y):
    """Minkowski inner product x0*y0 - x.y over the trailing axis of length 4."""
    xv, yv = value_of(x), value_of(y)
    if xv.shape[-1] != 4 or yv.shape[-1] != 4:
        raise ShapeError("mink_product expects trailing axis of length 4")
    if not (is_node(x) or is_node(y)):
        return np.einsum("...i,...i->...", xv * METRIC_SIGNS, yv)
    x, y = as_node(x), as_node(y)
    out = np.einsum("...i,...i->...", xv * METRIC_SIGNS, yv)
    return _make(out, (x, y), (
        lambda g, o=yv, s=xv.shape: _unbroadcast(g[..., None] * (o * METRIC_SIGNS), s),
        lambda g, o=xv, s=yv.shape: _unbroadcast(g[..., None] * (o * METRIC_SIGNS), s),
    ))


def eps_contract(a, b, c):
    """w_nu = eps_{nu rho sigma kappa} a^rho b^sigma c^kappa over trailing axes."""
    av, bv, cv = value_of(a), value_of(b), value_of(c)
    forward = np.einsum("npqr,...p,...q,...r->...n", _EPS4, av, bv, cv)
    if not (is_node(a) or is_node(b) or is_node(c)):
        return forward
    a, b, c = as_node(a), as_node(b), as_node(c)
    return _make(forward, (a, b, c), (
        lambda g, y=bv, z=cv, s=av.shape: _unbroadcast(
            np.einsum("npqr,...n,...q,...r->...p", _EPS4, g, y, z), s),
        lambda g, x=av, z=cv, s=bv.shape: _unbroadcast(
            np.einsum("npqr,...p,...n,...r->...q", _EPS4, x, g, z), s),
        lambda g, x=av, y=bv, s=cv.shape: _unbroadcast(
            np.einsum("npqr,...p,...q,...n->...r", _EPS4, x, y, g), s),
    ))


# ---------------------------------------------------------------------------
# neural-network nonlinearities
# ---------------------------------------------------------------------------

def softmax(a, axis=-1):
    if not is_node(a):
        shifted = np.exp(a - np.max(a, axis=axis, keepdims=True))
        return shifted / shifted.sum(axis=axis, keepdims=True)
    shifted = np.exp(a.value - np.max(a.value, axis=axis, keepdims=True))
    out = shifted / shifted.sum(axis=axis, keepdims=True)

    # Fused Jacobian-vector form: s * (g - sum(g*s)).
    def vjp(g, s=out, axis=axis):
        return s * (g - np.sum(g * s, axis=axis, keepdims=True))

    return _make(out, (a,), (vjp,))


def relu(a):
    if not is_node(a):
        return np.maximum(a, 0.0)
    return _make(np.maximum(a.value, 0.0), (a,), (
        lambda g, v=a.value: g * (v > 0.0),
    ))


def _gelu_forward(x):
    return 0.5 * x * (1.0 + _erf(x * _INV_SQRT2))


def gelu(a):
    """Exact Gaussian-CDF GELU."""
    if not is_node(a):
        return _gelu_forward(a)
    v = a.value

    def vjp(g, v=v):
        cdf = 0.5 * (1.0 + _erf(v * _INV_SQRT2))
        pdf = _INV_SQRT2PI * np.exp(-0.5 * v * v)
        return g * (cdf + v * pdf)

    return _make(_gelu_forward(v), (a,), (vjp,))


def layernorm(x, gain, bias, eps=1e-5):
    """Normalize over the trailing (channel) axis, then scale and shift."""
    mu = mean(x, axis=-1, keepdims=True)
    centered = sub(x, mu)
    var = mean(mul(centered, centered), axis=-1, keepdims=True)
    inv = pow_const(add(var, eps), -0.5)
    return add(mul(mul(centered, inv), gain), bias)


# ---------------------------------------------------------------------------
# operator sugar on Node
# ---------------------------------------------------------------------------

Node.__add__ = lambda self, other: add(self, other)
Node.__radd__ = lambda self, other: add(other, self)
Node.__sub__ = lambda self, other: sub(self, other)
Node.__rsub__ = lambda self, other: sub(other, self)
Node.__mul__ = lambda self, other: mul(self, other)
Node.__rmul__ = lambda self, other: mul(other, self)
Node.__truediv__ = lambda self, other: div(self, other)
Node.__rtruediv__ = lambda self, other: div(other, self)
Node.__neg__ = lambda self: neg(self)
Node.__matmul__ = lambda self, other: matmul(self, other)
Node.__rmatmul__ = lambda self, other: matmul(other, self)
Node.__pow__ = lambda self, e: pow_const(self, float(e))
Node.__getitem__ = lambda self, idx: getitem(self, idx)
