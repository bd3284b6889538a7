"""Exception types shared across the package."""


class InputError(ValueError):
    """A caller-supplied argument violates a precondition."""


class NumericError(ArithmeticError):
    """An evaluation produced a non-finite number."""


class RegimeError(ValueError):
    """A closed-form bound was requested outside its validity regime."""


class DegenerateHessianError(ValueError):
    """A Hessian eigenvalue is numerically zero at a stationary point."""


class GroupingError(ValueError):
    """Eigenvalue groups are inconsistent (equal eigenvalues across groups)."""


class NotDescentDirectionError(ValueError):
    """Second-order step requested where the Hessian has no negative curvature."""


class EstimationError(RuntimeError):
    """A Monte Carlo estimate could not be formed from the drawn samples."""
