"""Exception types; the CLI maps them onto exit codes."""


class CemLogrankError(Exception):
    """Base class for all package-specific errors."""


class DatasetFormatError(CemLogrankError):
    """Malformed dataset file (bad header, unparseable row, invalid value)."""


class ConfigError(CemLogrankError):
    """Invalid configuration: bad schema, out-of-range value, dimension mismatch."""


class SeparationError(CemLogrankError):
    """Logistic MLE diverges: complete or quasi-complete separation."""


class RankDeficiencyError(CemLogrankError):
    """Singular Hessian in the logistic fit (collinear features)."""


class WeightOverflowError(CemLogrankError):
    """A fitted propensity reached 0 or 1, so an inverse weight overflows."""
