"""Exception types raised across the package."""


class RefsafeError(Exception):
    """Base class for all refsafe errors."""


class InputError(RefsafeError, ValueError):
    """Malformed or inconsistent user input (dimensions, schemas, degenerate data)."""


class StabilityError(RefsafeError):
    """A closed-loop matrix that must be Hurwitz is not."""


class NumericalError(RefsafeError):
    """A linear-algebra step failed or left an unacceptable residual."""


class BudgetError(RefsafeError):
    """A combinatorial search would exceed its configured budget."""


class DomainError(RefsafeError):
    """A barrier function was evaluated on or outside its domain."""
