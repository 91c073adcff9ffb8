"""Central-difference verification of reverse-mode gradients."""

from __future__ import annotations

import numpy as np

from .autodiff import Tape, backward, ops, variable

DEFAULT_STEP = 1e-5


def _projection(shape) -> np.ndarray:
    # Fixed random weights keep the scalarized test non-degenerate for
    # functions with sum invariances (softmax rows, normalized outputs).
    return np.random.default_rng(12345).normal(size=shape)


def finite_difference_check(fn, arg_values, step: float = DEFAULT_STEP) -> float:
    """Max relative error between backward() and central differences.

    ``fn`` maps Nodes (one per entry of ``arg_values``) to an array Node; the
    output is contracted with fixed random weights and the comparison runs
    over every component of every argument.
    """
    arg_values = [np.asarray(a, dtype=np.float64) for a in arg_values]

    with Tape() as tape:
        nodes = [variable(a.copy()) for a in arg_values]
        out = fn(*nodes)
        weights = _projection(ops.value_of(out).shape)
        loss = ops.sum(ops.mul(out, weights))
    backward(tape, loss)
    analytic = [
        n.grad if n.grad is not None else np.zeros_like(n.value) for n in nodes
    ]

    def scalar_eval(values):
        return float(np.sum(ops.value_of(fn(*values)) * weights))

    worst = 0.0
    for which, base in enumerate(arg_values):
        flat = base.reshape(-1)
        grad_flat = analytic[which].reshape(-1)
        for idx in range(flat.size):
            bumped = [a.copy() for a in arg_values]
            bumped[which].reshape(-1)[idx] = flat[idx] + step
            f_plus = scalar_eval(bumped)
            bumped[which].reshape(-1)[idx] = flat[idx] - step
            f_minus = scalar_eval(bumped)
            numeric = (f_plus - f_minus) / (2.0 * step)
            err = abs(grad_flat[idx] - numeric) / (abs(numeric) + 1e-8)
            worst = max(worst, err)
    return worst


def parameter_gradient_check(loss_fn, params, names, step: float = DEFAULT_STEP,
                             rng: np.random.Generator | None = None) -> float:
    """Directional-derivative check of d(loss)/d(parameter), per parameter.

    For each named parameter a random unit direction u is drawn; the analytic
    <grad, u> is compared against the central difference of loss(theta + h u).
    Returns the worst relative error |analytic - numeric| / (|numeric| + 1e-8).
    """
    rng = rng or np.random.default_rng(0)
    with Tape() as tape:
        loss = loss_fn()
    grads = backward(tape, loss)
    for p in params.values():
        p.grad = None

    worst = 0.0
    for name in names:
        p = params[name]
        direction = rng.normal(size=p.value.shape)
        direction /= np.linalg.norm(direction)
        grad = grads.get(name)  # params the loss never touched have zero grad
        analytic = float(np.sum(grad * direction)) if grad is not None else 0.0

        original = p.value.copy()
        p.value = original + step * direction
        f_plus = float(ops.value_of(loss_fn()))
        p.value = original - step * direction
        f_minus = float(ops.value_of(loss_fn()))
        p.value = original
        numeric = (f_plus - f_minus) / (2.0 * step)
        err = abs(analytic - numeric) / (abs(numeric) + 1e-8)
        worst = max(worst, err)
    return worst
