"""Exception types raised across the package."""


class RcSymdetError(Exception):
    """Base class for all package errors."""


class ShapeError(RcSymdetError, ValueError):
    """Array dimensions do not match what an operation expects."""


class FramingError(RcSymdetError, ValueError):
    """A bit stream cannot be split into whole modulation symbols."""


class ConfigError(RcSymdetError, ValueError):
    """Invalid or inconsistent configuration."""


class NumericError(RcSymdetError, ArithmeticError):
    """Non-finite values encountered where finite ones are required."""


class NotTrainedError(RcSymdetError, RuntimeError):
    """Detection requested from a model that carries no trained readout."""
