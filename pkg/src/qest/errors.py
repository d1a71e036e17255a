"""Exception types raised across the toolkit."""


class QestError(Exception):
    """Base class for all toolkit errors."""


class NonHermitianInput(QestError, ValueError):
    pass


class InvalidState(QestError, ValueError):
    """Matrix fails the density-matrix invariants (trace, positivity)."""


class InconsistentRHS(QestError, ValueError):
    """Right-hand side has weight where the (anti)commutator equation has no solution."""


class DomainError(QestError, ValueError):
    pass


class DerivativeError(QestError):
    pass


class SingularJacobian(QestError):
    pass


class RldUndefined(QestError):
    """The RLD operators do not exist: some derivative leaves the support of the state."""


class SingularQfi(QestError, ArithmeticError):
    pass


class SingularOutcome(QestError):
    pass


class SolverFailure(QestError):
    pass


class SearchDegenerate(QestError):
    pass


class DegenerateScene(QestError, ValueError):
    pass


class GridUnconverged(QestError):
    pass


class TailTooLarge(QestError):
    pass


class NonConvergent(QestError):
    pass


class ConfigError(QestError, ValueError):
    """Invalid scenario configuration. ``field`` names the offending entry."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
