"""Exception types shared across the package."""


class TangentEqError(Exception):
    """Base class for all package errors."""


class PointNotInSet(TangentEqError):
    """A cone query was made at a point outside the set."""


class BoundViolated(TangentEqError):
    """A field value escaped its declared envelope."""


class EmptyIntersection(TangentEqError):
    """Field values and the tangent cone do not meet."""


class NoSignChange(TangentEqError):
    """Bisection endpoints carry the same sign."""


class CertificateFailed(TangentEqError):
    """The sampled sign certificate does not hold on the initial cube."""


class InvalidSpec(TangentEqError):
    """An operator description violates its preconditions."""


class SingularSystem(TangentEqError):
    """The resolvent system is (numerically) singular."""
