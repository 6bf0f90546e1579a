"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of a function or model."""


class DegenerateData(ValueError):
    """The data cannot identify the requested model (e.g. no overdispersion)."""


class MismatchError(ValueError):
    """Counts and grouped severities disagree."""


class SolverFailure(RuntimeError):
    """The nonlinear M-step solver did not converge.

    Attributes
    ----------
    residual : float
        Max-abs residual at the last accepted iterate.
    iteration : int or None
        EM iteration at which the failure happened, when known.
    """

    def __init__(self, message, residual=float("nan"), iteration=None):
        super().__init__(message)
        self.residual = residual
        self.iteration = iteration


class InfiniteMean(ArithmeticError):
    """The posterior mean claim size does not exist (shape <= 1)."""


class QuadratureFailure(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, achieved=float("nan")):
        super().__init__(message)
        self.achieved = achieved
