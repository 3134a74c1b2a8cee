"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: precondition / domain / parse problems
exit with 2, budget exhaustion with 3.
"""


class RandomGroupsError(Exception):
    """Base class for all package errors."""


class PreconditionError(RandomGroupsError):
    """An operation was called outside its contract (exit code 2)."""


class MalformedWordError(PreconditionError):
    """A word contains letters outside the alphabet or is otherwise invalid."""


class HeterogeneousLengthError(PreconditionError):
    """Relators of unequal length where the model fixes a single length."""


class DomainError(PreconditionError):
    """A numeric parameter is outside the domain of a formula."""


class NestingError(PreconditionError):
    """Attempt to extend a presentation to a strictly lower density."""


class ParseError(PreconditionError):
    """A file could not be parsed; carries a 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class BudgetExceededError(RandomGroupsError):
    """A configured enumeration / vertex / tuple budget was exceeded (exit code 3)."""

    def __init__(self, message: str, budget: int | None = None):
        self.budget = budget
        super().__init__(message)


class PartialBallError(BudgetExceededError):
    """Ball construction ran out of budget; carries the last completed radius."""

    def __init__(self, message: str, completed_radius: int, budget: int | None = None):
        self.completed_radius = completed_radius
        super().__init__(message, budget=budget)


class NotVerifiedError(PreconditionError):
    """Metric query on a presentation that is not verified C'(1/6)."""


class ConstructionObstructedError(RandomGroupsError):
    """Round-tree growth could not find a valid extension point or word."""

    def __init__(self, message: str, sector=None, vertex=None):
        self.sector = sector
        self.vertex = vertex
        super().__init__(message)


class BracketUnfillableError(ConstructionObstructedError):
    """No host relator contains a required bracket path label."""


class EmptyStatisticsError(RandomGroupsError):
    """A probe produced no conclusive samples."""
