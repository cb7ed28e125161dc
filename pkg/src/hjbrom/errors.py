"""Exception types raised by the package."""


class StabilityError(ValueError):
    """A matrix required to be Hurwitz (or a gain required to stabilize) is not."""


class SingularMatrixError(ValueError):
    """A linear system is singular to working precision."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to converge.

    Attributes
    ----------
    iterations : int
        Number of iterations performed before giving up.
    history : list of float
        Per-iteration progress measure (residuals or increments), when
        available.
    """

    def __init__(self, message, iterations=None, history=None):
        super().__init__(message)
        self.iterations = iterations
        self.history = list(history) if history is not None else []


class RankDeficiencyError(ValueError):
    """Requested basis order exceeds the numerical rank of the input."""


class BlowUpError(RuntimeError):
    """A time-stepping loop produced a state above the overflow guard.

    Attributes
    ----------
    step : int
        Index of the offending time step.
    """

    def __init__(self, message, step):
        super().__init__(message)
        self.step = step


class DivergenceError(RuntimeError):
    """Value iteration produced unbounded node values."""


class ConfigError(ValueError):
    """A scenario configuration file or override is malformed."""
