"""Exception types shared across the package."""


class FluxchainError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(FluxchainError, ValueError):
    """Invalid physical parameters or arguments."""


class ConvergenceError(FluxchainError, RuntimeError):
    """Eigensolver failed to converge within the allowed basis sizes."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class CapacityError(FluxchainError, ValueError):
    """Requested Hilbert-space dimension exceeds the configured maximum."""


class IntegrationError(FluxchainError, RuntimeError):
    """Time integration failed; carries the last time reached."""

    def __init__(self, message, achieved_time=None):
        super().__init__(message)
        self.achieved_time = achieved_time


class EnsembleError(FluxchainError, RuntimeError):
    """Too many failed realizations in a disorder ensemble."""


class ConfigError(FluxchainError, ValueError):
    """Malformed or unknown run-configuration content."""


class CheckpointMismatchError(FluxchainError, RuntimeError):
    """Checkpoint file does not belong to the requested configuration."""
