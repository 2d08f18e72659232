"""Exception types raised across the package."""


class DupcError(Exception):
    """Base class for all errors raised by this package."""


class ZeroMatrix(DupcError, ValueError):
    pass


class InfeasibleRHS(DupcError, ValueError):
    pass


class NoConvergence(DupcError, RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message, residual=None, step=None):
        self.residual = residual
        self.step = step
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)


class SingularKKT(DupcError, RuntimeError):
    pass


class SingularHessian(DupcError, RuntimeError):
    pass


class ZeroSamplingPeriod(DupcError, ValueError):
    pass


class NotContractive(DupcError, ValueError):
    pass


class DisconnectedGraph(DupcError, ValueError):
    pass


class DegenerateFit(DupcError, ValueError):
    pass


class ConfigError(DupcError, ValueError):
    pass
