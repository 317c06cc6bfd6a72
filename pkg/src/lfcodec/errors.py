"""Exception types raised across the package."""


class LfError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(LfError, ValueError):
    pass


class UnsupportedGrid(LfError, ValueError):
    pass


class CorruptStream(LfError):
    """A bitstream lacks a record the decoder cannot do without."""


class MalformedPayload(LfError):
    """A view payload cannot be parsed."""


class ProcessFailure(LfError):
    """An external encoder process failed or produced unusable output."""


class TrainingDiverged(LfError, FloatingPointError):
    pass


class DomainError(LfError, ValueError):
    """A value is outside the domain of a formula (e.g. log of a non-positive score)."""
