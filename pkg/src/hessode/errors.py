"""Exception types shared across the package."""


class HessodeError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(HessodeError, ValueError):
    """A state vector or matrix has the wrong length/shape."""


class MaxStepsExceeded(HessodeError, RuntimeError):
    """The adaptive step collapsed or the step budget ran out.

    Typically signals stiffness or a solution escaping to infinity in
    finite time.
    """

    def __init__(self, message, t=None, state=None):
        super().__init__(message)
        self.t = t
        self.state = state


class NonFiniteState(HessodeError, ArithmeticError):
    """NaN or Inf encountered during integration."""


class SingularConfiguration(HessodeError, ValueError):
    """A mechanical system was evaluated too close to a collision."""


class NonFiniteOutput(HessodeError, ArithmeticError):
    """A probed callable returned NaN or Inf."""


class GradientMismatch(HessodeError, ValueError):
    """An analytic gradient disagrees with its finite-difference check."""

    def __init__(self, message, index=None, analytic=None, reference=None):
        super().__init__(message)
        self.index = index
        self.analytic = analytic
        self.reference = reference


class NotConverged(HessodeError, RuntimeError):
    """An iterative solver exhausted its sweep budget."""


class LineSearchFailure(HessodeError, RuntimeError):
    """The Wolfe line search could not make progress."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class DidNotConverge(HessodeError, RuntimeError):
    """The optimizer hit its iteration budget; carries the best point seen."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ReconvergedToOriginal(HessodeError, RuntimeError):
    """A deformed start flowed back to the solution it was deformed from."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
