"""Reverse-mode differentiation engine used throughout the package."""

from .engine import Node, Parameter, Tape, backward, constant, variable, zero_grad
from . import ops
from .optim import Adam, adam_init, adam_step
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "Node", "Parameter", "Tape", "backward", "constant", "variable", "zero_grad",
    "ops", "Adam", "adam_init", "adam_step", "load_checkpoint", "save_checkpoint",
]
