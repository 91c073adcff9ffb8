"""Small parameterized layers on top of the autodiff engine."""

from __future__ import annotations

import numpy as np

from .autodiff import Parameter, ops


class ParamStore:
    """Creates and owns named parameters; one store per model."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.params: dict[str, Parameter] = {}

    def parameter(self, name: str, shape: tuple, scale: float) -> Parameter:
        if name in self.params:
            raise ValueError(f"duplicate parameter name {name!r}")
        value = self.rng.normal(0.0, scale, size=shape) if scale > 0 else np.zeros(shape)
        p = Parameter(value, name)
        self.params[name] = p
        return p

    def load_values(self, values: dict[str, np.ndarray]) -> None:
        for name, p in self.params.items():
            if name not in values:
                raise KeyError(f"checkpoint is missing parameter {name!r}")
            if values[name].shape != p.value.shape:
                raise ValueError(f"shape mismatch for {name!r}")
            p.value = values[name].astype(np.float64)

    def values(self) -> dict[str, np.ndarray]:
        return {name: p.value.copy() for name, p in self.params.items()}


class Linear:
    """y = x @ w + b with fan-in scaled Gaussian init."""

    def __init__(self, store: ParamStore, name: str, d_in: int, d_out: int,
                 init_gain: float = 1.0):
        self.w = store.parameter(f"{name}.w", (d_in, d_out), init_gain / np.sqrt(d_in))
        self.b = store.parameter(f"{name}.b", (d_out,), 0.0)

    def __call__(self, x, detached: bool = False):
        w = self.w.value if detached else self.w
        b = self.b.value if detached else self.b
        return ops.add(ops.matmul(x, w), b)


class MLP:
    """Fully connected stack with GELU between layers."""

    def __init__(self, store: ParamStore, name: str, dims: list[int],
                 final_gain: float = 1.0):
        self.layers = [
            Linear(store, f"{name}.{i}", dims[i], dims[i + 1],
                   init_gain=final_gain if i == len(dims) - 2 else 1.0)
            for i in range(len(dims) - 1)
        ]

    def __call__(self, x, detached: bool = False):
        for i, layer in enumerate(self.layers):
            x = layer(x, detached=detached)
            if i < len(self.layers) - 1:
                x = ops.gelu(x)
        return x


class LayerNorm:
    """Pre-norm style normalization over the channel axis with learnable affine."""

    def __init__(self, store: ParamStore, name: str, dim: int, eps: float = 1e-5):
        self.gain = store.parameter(f"{name}.gain", (dim,), 0.0)
        self.gain.value = np.ones(dim)
        self.bias = store.parameter(f"{name}.bias", (dim,), 0.0)
        self.eps = eps

    def __call__(self, x, detached: bool = False):
        gain = self.gain.value if detached else self.gain
        bias = self.bias.value if detached else self.bias
        return ops.layernorm(x, gain, bias, eps=self.eps)
