"""Exception types shared across the package."""


class LlocaError(Exception):
    """Base class for errors raised by this package."""


class DomainError(LlocaError, ValueError):
    """Input violates a mathematical precondition (wrong sign, non-finite, ...)."""


class DegenerateInput(DomainError):
    """Inputs are too close to linearly dependent to define a frame."""


class DimensionError(LlocaError, ValueError):
    """Feature length does not match the representation it is paired with."""


class ShapeError(DimensionError):
    """Array shapes are incompatible for the requested operation."""


class GraphError(LlocaError, RuntimeError):
    """Backward pass requested through a node the tape never recorded."""


class FormatError(LlocaError, ValueError):
    """A binary file does not follow the expected layout."""


class ConfigError(LlocaError, ValueError):
    """A run configuration is missing keys or holds an invalid value."""
