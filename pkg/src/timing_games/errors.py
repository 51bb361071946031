"""Exception hierarchy shared by all modules."""


class TimingGameError(Exception):
    """Base class for every error raised by this package."""


class DomainError(TimingGameError, ValueError):
    """Argument outside the mathematical domain of a function."""


class ShapeError(TimingGameError, ValueError):
    """Arrays sampled on inconsistent grids or with mismatched shapes."""


class ValidationError(TimingGameError, ValueError):
    """A strategy violates the feasibility conditions."""

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations or [])


class PreconditionError(TimingGameError, ValueError):
    """Caller broke a documented precondition (e.g. theta > theta')."""


class EmptyLimitError(TimingGameError):
    """No admissible sample in any right window; the right limit is undefined."""


class LatticeError(TimingGameError, ValueError):
    """Malformed lattice (bad transition probabilities or shapes)."""


class ConsistencyError(TimingGameError):
    """Positive stopping intensity requested before the preemption region."""


class ConfigurationError(TimingGameError, ValueError):
    """Scenario or model configuration is incomplete or contradictory."""


class NumericalError(TimingGameError, ArithmeticError):
    """A numerical procedure failed (e.g. no sign change to bisect)."""


class ModelError(TimingGameError, ValueError):
    """Model primitives violate their invariants."""
