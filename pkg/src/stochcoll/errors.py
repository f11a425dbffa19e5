"""Exception hierarchy shared across the package."""


class StochCollError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(StochCollError, ValueError):
    pass


class InvalidTargetError(StochCollError, ValueError):
    """A target function produced a non-finite value."""


class SingularityError(StochCollError, ValueError):
    """A Lipschitz rule hit a vanishing denominator (reciprocal, sqrt at 0)."""


class InsufficientBeliefError(StochCollError, ValueError):
    pass


class DomainError(StochCollError, ValueError):
    """Time argument outside the planning horizon."""


class PlanError(StochCollError, ValueError):
    pass


class CovarianceError(StochCollError, ValueError):
    pass


class DimensionMismatchError(StochCollError, ValueError):
    pass


class ConfigError(StochCollError, ValueError):
    """Scenario configuration could not be parsed or validated."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class UnreachableConfidenceError(StochCollError, ValueError):
    def __init__(self, message, best_miss_probability):
        self.best_miss_probability = best_miss_probability
        super().__init__(message)
