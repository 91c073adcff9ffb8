"""Lorentz local canonicalization: equivariant frames for arbitrary backbones."""

from . import autodiff, frames, frames_net, lloca_model, minkowski, tensor_rep, toy_task
from .errors import (ConfigError, DegenerateInput, DimensionError, DomainError,
                     FormatError, GraphError, LlocaError, ShapeError)

__version__ = "0.1.0"

__all__ = [
    "autodiff", "frames", "frames_net", "lloca_model", "minkowski",
    "tensor_rep", "toy_task",
    "LlocaError", "DomainError", "DegenerateInput", "DimensionError",
    "ShapeError", "GraphError", "FormatError", "ConfigError",
]
