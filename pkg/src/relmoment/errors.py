"""Exception types shared across the package."""


class AdmissibilityError(ValueError):
    """A state or set of moments lies outside the physically admissible set."""


class ConvergenceError(ArithmeticError):
    """An iteration failed to converge within its cap."""
