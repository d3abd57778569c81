"""Exception types raised across the package."""


class SwitchSpinError(Exception):
    """Base class for package errors."""


class NormalizationError(SwitchSpinError, ValueError):
    """A vector or quaternion that must be unit length is not."""


class DegenerateFrameError(SwitchSpinError, ValueError):
    """An electron manifold has zero effective nuclear field."""


class NotControllableError(SwitchSpinError, ValueError):
    """The two switching axes cannot generate the requested operations."""


class ManifoldMismatchError(SwitchSpinError, ValueError):
    """Sequences or propagators disagree about the electron state."""


class SynthesisError(SwitchSpinError, RuntimeError):
    """A construction failed; ``best_residual`` carries the closest miss."""

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual
