"""Exception hierarchy shared by all modules."""


class DecayCohError(Exception):
    """Base class for all package errors."""


class ValidationError(DecayCohError, ValueError):
    """Invalid configuration or input value."""


class NumericalError(DecayCohError, ArithmeticError):
    """A numerical procedure could not produce a trustworthy result."""


class QuadratureError(NumericalError):
    """Adaptive quadrature did not converge within its budget.

    Attributes:
        achieved: error estimate reached when the budget ran out.
        target: requested tolerance.
    """

    def __init__(self, message, achieved=float("nan"), target=float("nan")):
        super().__init__(message)
        self.achieved = achieved
        self.target = target


class DegenerateFieldError(NumericalError):
    """Every ray is fully absorbed, so the coherence quotient is 0/0."""


class ImageBudgetError(ValidationError):
    """Image-source enumeration would exceed the configured image budget."""

    def __init__(self, message, count, budget):
        super().__init__(message)
        self.count = count
        self.budget = budget
