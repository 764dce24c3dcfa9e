"""Exception types raised by spliceglm."""


class InvalidInputError(ValueError):
    """Raised when arguments violate a documented precondition."""


class DegenerateColumnError(InvalidInputError):
    """Raised when a design column has zero norm and cannot be normalized."""

    def __init__(self, column, name=None):
        self.column = column
        label = f"{column}" if name is None else f"{column} ({name!r})"
        super().__init__(f"design column {label} is identically zero")


class NumericalFailure(ArithmeticError):
    """Raised when a restricted fit cannot be carried out numerically.

    Attributes
    ----------
    active : tuple of int
        The active set whose restricted problem failed.
    """

    def __init__(self, message, active=()):
        self.active = tuple(int(j) for j in active)
        super().__init__(f"{message} (active set: {list(self.active)})")
