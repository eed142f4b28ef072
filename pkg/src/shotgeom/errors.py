"""Exception types shared by the package."""


class InvalidParameterError(ValueError):
    """A parameter is outside the domain an operation accepts."""


class SingularEvaluationError(ArithmeticError):
    """A singular kernel was evaluated (numerically) at its own atom."""


class DegenerateConfigurationError(RuntimeError):
    """Circles are tangent to each other or to the window boundary."""


class DegenerateSampleError(ValueError):
    """A sample has no spread, so it cannot be standardized."""


class ReplicateBudgetExceeded(RuntimeError):
    """Too many replicates of a batch aborted."""

    def __init__(self, failed, n, budget):
        self.failed = list(failed)
        self.n = n
        self.budget = budget
        super().__init__(
            f"{len(self.failed)} of {n} replicates aborted "
            f"(budget {budget:.3%})")
