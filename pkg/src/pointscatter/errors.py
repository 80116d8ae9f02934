"""Exception hierarchy.

Each class carries the CLI exit code it maps to, so the runner can translate
failures without a lookup table.
"""


class PointScatterError(Exception):
    exit_code = 1


class DomainError(PointScatterError, ValueError):
    """Input outside the mathematical domain of an operation."""

    exit_code = 2


class PoleProximityError(DomainError):
    """Spectral parameter too close to an old eigenvalue; use offset_form."""


class PreconditionError(DomainError):
    pass


class ResourceError(PointScatterError):
    """Requested work exceeds the active resource budget."""

    exit_code = 3


class ConsistencyError(PointScatterError):
    """An internal invariant failed (should not happen for valid input)."""

    exit_code = 4


class NoSignChangeError(ConsistencyError):
    pass
