"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented precondition (bad environment, shapes, ...)."""


class SizeError(ValidationError):
    """Requested tensor does not fit in the platform index range."""


class CapacityError(ValidationError):
    """Exact enumeration requested above the configured engine limit."""

    def __init__(self, n, p, limit):
        self.n, self.p, self.limit = n, p, limit
        super().__init__(f"n={n}, p={p} exceeds the exact-enumeration limit n<={limit}")


class AssumptionError(ValidationError):
    """Environment does not belong to the moment class a bound requires."""


class NumericalError(ArithmeticError):
    """A numerical routine (quadrature, fit) failed to reach its tolerance."""

    def __init__(self, message, achieved=None):
        self.achieved = achieved
        super().__init__(message if achieved is None else f"{message} (achieved {achieved:.3g})")
