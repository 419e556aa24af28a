"""Exception and warning types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConvergenceError(RuntimeError):
    """An iterative routine exhausted its iteration budget."""


class QuadratureWarning(UserWarning):
    """Two quadrature resolutions disagree beyond the configured tolerance."""


class FlatObjectiveWarning(UserWarning):
    """A scalar objective is numerically flat over the whole search interval."""
