"""Desk-scale auditing of hidden-preprocessing bias in undersampled MRI reconstruction."""
__version__ = "0.1.0"

from .errors import (ConfigError, CrimescopeError, IngestError, InfeasibleRateError,
                     InvalidArgumentError, InvalidInputError, UndefinedMetricError)

__all__ = ["__version__", "CrimescopeError", "InvalidInputError", "InvalidArgumentError",
           "InfeasibleRateError", "IngestError", "UndefinedMetricError", "ConfigError"]
