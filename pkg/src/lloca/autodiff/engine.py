"""Define-by-run reverse-mode differentiation over numpy arrays.

A forward pass executed inside a ``with Tape() as tape:`` block records every
produced :class:`Node` in execution order (a Wengert list). ``backward(tape,
loss)`` then walks that list once in reverse, accumulating vector-Jacobian
products into the leaves. The tape is rebuilt on every forward pass; nothing
is compiled or cached.

All values are float64. Gradients of intermediate nodes are freed as soon as
they have been propagated; leaves (:class:`Parameter` and :func:`variable`
nodes) keep theirs until :func:`zero_grad`.
"""

from __future__ import annotations

import numpy as np

from ..errors import GraphError

_TAPE_STACK: list["Tape"] = []


def _as_value(x) -> np.ndarray:
    arr = np.asarray(x)
    if arr.dtype != np.float64:
        arr = arr.astype(np.float64)
    return arr


class Node:
    """One recorded value in the computation graph."""

    # Keep numpy from consuming Nodes in ufuncs; reflected operators win.
    __array_ufunc__ = None

    __slots__ = ("value", "parents", "vjps", "grad", "requires_grad")

    def __init__(self, value, parents=(), vjps=(), requires_grad=False):
        self.value = _as_value(value)
        self.parents = parents
        self.vjps = vjps
        self.grad = None
        self.requires_grad = requires_grad
        if _TAPE_STACK:
            _TAPE_STACK[-1]._record(self)

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __repr__(self):
        tag = "param" if isinstance(self, Parameter) else "node"
        return f"<{tag} shape={self.value.shape} requires_grad={self.requires_grad}>"

    # Arithmetic dunders are attached by lloca.autodiff.ops at import time.


class Parameter(Node):
    """A named leaf whose value persists across tapes and is trained."""

    __slots__ = ("name",)

    def __init__(self, value, name: str):
        super().__init__(value, requires_grad=True)
        self.name = name


def variable(value) -> Node:
    """An anonymous differentiable leaf (for gradient checks and tests)."""
    return Node(value, requires_grad=True)


def constant(value) -> Node:
    return Node(value, requires_grad=False)


class Tape:
    """Execution record: ordered node list plus the touched-parameter registry."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.params: dict[str, Parameter] = {}
        self._ids: set[int] = set()

    def _record(self, node: Node) -> None:
        self.nodes.append(node)
        self._ids.add(id(node))
        for p in node.parents:
            if isinstance(p, Parameter):
                self.params[p.name] = p

    def watch(self, *params: Parameter) -> None:
        """Register parameters so backward() reports them even if unused."""
        for p in params:
            self.params[p.name] = p

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        popped = _TAPE_STACK.pop()
        assert popped is self

    def __len__(self) -> int:
        return len(self.nodes)


def backward(tape: Tape, loss: Node) -> dict[str, np.ndarray]:
    """Accumulate gradients of ``loss`` into every leaf reachable on ``tape``.

    Returns ``{name: gradient}`` for the tape's registered parameters; a
    parameter the loss never touched gets a zero gradient of matching shape.
    """
    if not isinstance(loss, Node) or id(loss) not in tape._ids:
        raise GraphError("loss node was not recorded on this tape")
    if loss.value.size != 1:
        raise GraphError(f"loss must be scalar, got shape {loss.value.shape}")

    loss.grad = np.ones_like(loss.value)
    for node in reversed(tape.nodes):
        g = node.grad
        if g is None or not node.requires_grad:
            continue
        for parent, vjp in zip(node.parents, node.vjps):
            if not parent.requires_grad or vjp is None:
                continue
            contrib = vjp(g)
            parent.grad = contrib if parent.grad is None else parent.grad + contrib
        if node.parents:  # free intermediate storage; leaves keep grads
            node.grad = None

    grads = {}
    for name, p in tape.params.items():
        if p.grad is None:
            p.grad = np.zeros_like(p.value)
        grads[name] = p.grad
    return grads


def zero_grad(params) -> None:
    """Clear accumulated gradients on an iterable or mapping of parameters."""
    values = params.values() if hasattr(params, "values") else params
    for p in values:
        p.grad = None
