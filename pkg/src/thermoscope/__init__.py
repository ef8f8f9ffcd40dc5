"""Acoustic estimation of radial temperature profiles in heated cylinders."""

from .errors import (DatasetError, DegenerateSignalError, DivergenceError, FitError, FormatVersionError,
                     InvalidArgumentError, LeakageError, RecordOverflowError, SolverError, StateError,
                     ThermoscopeError)

__version__ = "0.1.0"

__all__ = [
    "DatasetError", "DegenerateSignalError", "DivergenceError", "FitError", "FormatVersionError",
    "InvalidArgumentError", "LeakageError", "RecordOverflowError", "SolverError", "StateError",
    "ThermoscopeError", "__version__",
]
