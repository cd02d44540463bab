"""Exception hierarchy. Every error raised on purpose derives from CrimescopeError."""


class CrimescopeError(Exception):
    pass


class InvalidInputError(CrimescopeError, ValueError):
    """Array data that violates a shape/finiteness contract."""


class InvalidArgumentError(CrimescopeError, ValueError):
    """A scalar or shape argument out of its allowed range."""


class InfeasibleRateError(InvalidArgumentError):
    """Target sampling rate cannot be reached with the requested calibration block."""


class IngestError(CrimescopeError):
    """Raw-data container is missing keys or has the wrong layout."""


class UndefinedMetricError(CrimescopeError, ValueError):
    """Metric is undefined for the given reference (e.g. zero dynamic range)."""


class ConfigError(CrimescopeError):
    """Experiment configuration is malformed."""
