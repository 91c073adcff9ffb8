"""Adam with bias correction, in functional and stateful-wrapper form."""

from __future__ import annotations

import numpy as np

from .engine import Parameter


def adam_init(params: dict[str, np.ndarray]) -> dict:
    """Fresh optimizer state (first/second moments and step counter)."""
    return {
        "t": 0,
        "m": {k: np.zeros_like(v) for k, v in params.items()},
        "v": {k: np.zeros_like(v) for k, v in params.items()},
    }


def adam_step(params, grads, state, lr=1e-3, beta1=0.99, beta2=0.999, eps=1e-8):
    """One Adam update; returns (new_params, new_state) without mutating inputs.

    beta defaults follow the training setup this pipeline targets.
    """
    t = state["t"] + 1
    new_params, new_m, new_v = {}, {}, {}
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for name, p in params.items():
        g = grads[name]
        m = beta1 * state["m"][name] + (1.0 - beta1) * g
        v = beta2 * state["v"][name] + (1.0 - beta2) * g * g
        m_hat = m / bc1
        v_hat = v / bc2
        new_params[name] = p - lr * m_hat / (np.sqrt(v_hat) + eps)
        new_m[name] = m
        new_v[name] = v
    return new_params, {"t": t, "m": new_m, "v": new_v}


class Adam:
    """In-place Adam over a dict of Parameters, built on :func:`adam_step`."""

    def __init__(self, params: dict[str, Parameter], lr=1e-3, beta1=0.99,
                 beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state = adam_init({k: p.value for k, p in params.items()})

    def step(self) -> None:
        values = {k: p.value for k, p in self.params.items()}
        grads = {
            k: (p.grad if p.grad is not None else np.zeros_like(p.value))
            for k, p in self.params.items()
        }
        new_values, self.state = adam_step(
            values, grads, self.state, self.lr, self.beta1, self.beta2, self.eps
        )
        for k, p in self.params.items():
            p.value = new_values[k]

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None
