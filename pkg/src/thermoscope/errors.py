"""Exception hierarchy shared across thermoscope modules."""


class ThermoscopeError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(ThermoscopeError, ValueError):
    pass


class DegenerateSignalError(ThermoscopeError):
    """A receiver column has zero variance and cannot be normalized."""

    def __init__(self, rx_index, message=None):
        self.rx_index = rx_index
        super().__init__(message or f"receiver {rx_index}: constant envelope, cannot normalize")


class SolverError(ThermoscopeError):
    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"nonlinear iteration failed to converge at step {step}")


class RecordOverflowError(ThermoscopeError):
    def __init__(self, tx, rx, arrival, record_length):
        self.tx = tx
        self.rx = rx
        super().__init__(
            f"pair tx={tx} rx={rx}: arrival at {arrival * 1e6:.2f} us exceeds "
            f"record length {record_length * 1e6:.2f} us"
        )


class FitError(ThermoscopeError):
    def __init__(self, fitted_rmse, identity_rmse):
        self.fitted_rmse = fitted_rmse
        self.identity_rmse = identity_rmse
        super().__init__(
            f"correction fit did not improve on identity "
            f"(fitted rmse {fitted_rmse:.4g} C, identity rmse {identity_rmse:.4g} C)"
        )


class StateError(ThermoscopeError, RuntimeError):
    pass


class DivergenceError(ThermoscopeError):
    def __init__(self, epoch, fold=None):
        self.epoch = epoch
        self.fold = fold
        where = f" (fold {fold})" if fold is not None else ""
        super().__init__(f"training loss became non-finite at epoch {epoch}{where}")


class LeakageError(ThermoscopeError, AssertionError):
    """Train and test sets overlap."""


class DatasetError(ThermoscopeError):
    """Structured dataset load failure; ``path`` names the offending file."""

    def __init__(self, path, message):
        self.path = str(path)
        super().__init__(f"{path}: {message}")


class FormatVersionError(DatasetError):
    pass
