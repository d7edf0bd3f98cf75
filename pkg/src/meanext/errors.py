"""Exception hierarchy shared by all modules."""


class MeanExtError(Exception):
    """Base class for every error raised by this package."""


class DomainError(MeanExtError, ValueError):
    """An input lies outside the domain of a mean (non-positive number, non-SPD matrix)."""


class ConfigurationError(MeanExtError, ValueError):
    """A mean, mapping or run configuration is malformed."""


class PreconditionError(MeanExtError, ValueError):
    """An operation was called on inputs violating its stated precondition."""


class ConvergenceError(MeanExtError, RuntimeError):
    """An inner extension failed to converge within its iteration budget.

    Only raised for nested evaluations (the variation scheme); top-level runs
    report non-convergence through ``ExtensionResult.converged`` instead.
    """

    def __init__(self, message, depth=None, sub_input=None):
        super().__init__(message)
        self.depth = depth
        self.sub_input = sub_input


class EvaluatorError(MeanExtError, RuntimeError):
    """An n-variable evaluator raised while the axiom checker was probing it."""

    def __init__(self, message, offending_input=None):
        super().__init__(message)
        self.offending_input = offending_input
