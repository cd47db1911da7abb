"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the model or operation."""


class NumericError(ArithmeticError):
    """A numerical routine failed to converge or lost all precision.

    ``partial`` carries whatever estimate was available at the time of failure.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class MultiCrossing(RuntimeError):
    """phi_k was not monotone in beta on the bracket grid (k > 2 only)."""


class InsufficientConditioningEvents(RuntimeError):
    """No simulated trial fell inside the conditioning event."""


class EmptyConditioningEvent(ValueError):
    """The conditioning event of an exact enumeration has probability zero."""
