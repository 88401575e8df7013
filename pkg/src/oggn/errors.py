"""Exception types shared across the package."""


class OGGNError(Exception):
    """Base class for all package errors."""


class ShapeError(OGGNError, ValueError):
    """Array dimensions do not agree with what an operation expects."""


class DomainError(OGGNError, ValueError):
    """A function was evaluated outside its real domain."""


class ConfigError(OGGNError, ValueError):
    """Invalid parameters or conflicting options."""


class ParseError(OGGNError, ValueError):
    """A file could not be decoded."""


class ValidationError(ParseError):
    """A file decoded fine but its contents are inconsistent."""


class TrainingDivergedError(OGGNError, ArithmeticError):
    """Loss became non-finite during training."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch
