"""Exception hierarchy shared across the package.

Every failure mode callers are expected to handle maps to one of these
types; generic ValueError/RuntimeError never escape the public surface.
"""


class FairdivError(Exception):
    """Base class for all package errors."""


class InstanceError(FairdivError, ValueError):
    """An instance violates a structural constraint (shape, sign, emptiness)."""


class DegenerateAgentError(InstanceError):
    """A group values every item type at zero, so it cannot be normalized."""


class UndefinedShareError(FairdivError, ValueError):
    """A mechanism share has no defined value (e.g. an item nobody values)."""


class DivergenceUndefinedError(FairdivError, ValueError):
    """A divergence is undefined on the given pair (support violation)."""


class UnsupportedScopeError(FairdivError, ValueError):
    """The operation is defined only on a narrower class of instances."""


class PreconditionError(FairdivError, ValueError):
    """A documented precondition of the operation does not hold.

    Carries an optional machine-readable ``report`` payload so callers
    (CLI, service) can surface the failed check without re-deriving it.
    """

    def __init__(self, message: str, report: object = None):
        super().__init__(message)
        self.report = report


class InsufficientMassError(PreconditionError):
    """A cut query asked for more mass than remains to the right of the mark."""


class SolverError(FairdivError, RuntimeError):
    """The LP solver failed outside the optimal/unbounded/infeasible contract."""


class InternalInvariantError(FairdivError, RuntimeError):
    """A guaranteed invariant failed; results are never returned silently."""


class ParseError(FairdivError, ValueError):
    """Input document rejected; ``location`` points at the offending field."""

    def __init__(self, message: str, location: str = ""):
        detail = f"{location}: {message}" if location else message
        super().__init__(detail)
        self.location = location
