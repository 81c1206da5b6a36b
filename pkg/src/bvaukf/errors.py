"""Exception hierarchy shared by all modules."""


class BvaukfError(Exception):
    """Base class for all package errors."""

    #: pipeline / CLI stage the error originated from, filled in by callers
    stage = None


class DataError(BvaukfError):
    """Input data is malformed or insufficient."""


class NumericError(BvaukfError):
    """A numerical routine failed."""


class InvalidPose(DataError):
    pass


class DegeneratePose(DataError):
    pass


class TooShort(DataError):
    pass


class LengthMismatch(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class EmptyDataset(DataError):
    pass


class Unreachable(DataError):
    pass


class SingularMass(NumericError):
    pass


class NotPSD(NumericError):
    pass


class SingularInnovation(NumericError):
    pass


class DivergedLoss(NumericError):
    pass


class FilterDiverged(NumericError):
    pass


class ConfigError(BvaukfError):
    """Run configuration is missing keys or has invalid values."""
