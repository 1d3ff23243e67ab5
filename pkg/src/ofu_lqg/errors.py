"""Exception types shared across the package.

Everything numerical or infeasible derives from :class:`LqgControlError` so
callers (notably the CLI) can separate "bad input file" from "the math said
no".
"""


class LqgControlError(Exception):
    """Base class for numerical, feasibility, and data errors."""


class DimensionError(LqgControlError, ValueError):
    """Matrix or vector shapes are inconsistent."""


class ParameterError(LqgControlError, ValueError):
    """A scalar parameter is outside its valid range."""


class MarginError(ParameterError):
    """Contractibility margin does not dominate the closed-loop radii."""


class UnstableSystemError(LqgControlError):
    """Spectral radius of the state matrix is >= 1 where stability is required."""


class ConvergenceError(LqgControlError):
    """A fixed-point solver ran out of iterations."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class FeasibilityError(LqgControlError):
    """Controller synthesis violated a structural precondition."""


class FilterPhaseError(LqgControlError):
    """Kalman filter correct/predict calls were mis-sequenced."""


class InsufficientDataError(LqgControlError, ValueError):
    """Trajectory is too short for the requested construction."""


class IllPosedRegressionError(LqgControlError):
    """Regressor matrix is rank deficient or under-determined."""


class OrderDeficiencyError(LqgControlError):
    """Requested realization order exceeds the evident rank of the data."""


class SelectionError(LqgControlError):
    """No feasible model found within the optimistic search budget."""

    def __init__(self, message, rejections=None):
        super().__init__(message)
        self.rejections = dict(rejections or {})


class DivergenceError(LqgControlError):
    """Closed-loop signals exceeded the overflow guard during simulation."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class EnsembleError(LqgControlError):
    """Every trial of a Monte-Carlo ensemble failed."""
