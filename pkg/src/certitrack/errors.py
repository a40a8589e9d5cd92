"""Exception hierarchy.

Every failure the library can signal deliberately derives from
CertitrackError.  Numerical failure modes (Stalled, RefineStalled,
Diverged) are ordinary control flow for callers implementing retry
ladders; they carry enough context to decide whether to escalate
precision or give up.
"""

from __future__ import annotations


class CertitrackError(Exception):
    """Base class for all library errors."""


# ---------------------------------------------------------------- interval

class IntervalDivisionByZero(CertitrackError):
    """Divisor interval contains zero."""


# ------------------------------------------------------------- numberfield

class InverseOfZero(CertitrackError):
    """Attempted to invert the zero element."""


class NotInvertible(CertitrackError):
    """Element is a zero divisor; the defining polynomial is reducible."""


class IsolationFailed(CertitrackError):
    """Could not certify a root of the defining polynomial near the
    requested approximation within the precision ceiling."""


# ----------------------------------------------------------------- certify

class CertifyFailed(CertitrackError):
    """No certified box could be produced from the approximation."""


class RefineStalled(CertitrackError):
    """Refinement cannot reach the requested contraction factor at the
    current working precision.  Callers escalate precision."""


# ------------------------------------------------------------------- track

class Stalled(CertitrackError):
    """Step size collapsed below delta_min at the precision ceiling."""


class Diverged(CertitrackError):
    """Tracked point exceeded the divergence threshold.  A normal
    outcome for surplus bootstrap paths, input corruption otherwise."""


class Cancelled(CertitrackError):
    """Tracking was cancelled cooperatively."""


# --------------------------------------------------------------- monodromy

class FiberCountMismatch(CertitrackError):
    """Found a number of certified fiber points different from the
    declared degree."""


class MatchFailed(CertitrackError):
    """Endpoint of a tracked loop could not be matched to exactly one
    start fiber point."""


class DegenerateLoop(CertitrackError):
    """Requested loop geometry does not separate the branch points."""


# ------------------------------------------------------------------- belyi

class NotCoprime(CertitrackError):
    """Numerator and denominator share a common factor."""


class DegenerateModel(CertitrackError):
    """Model equations fail a structural sanity check."""


# ------------------------------------------------------------------ ingest

class ParseError(CertitrackError):
    """Malformed entry document."""


class InvalidTriple(CertitrackError):
    """Permutation triple fails validation (product, degree, bounds)."""


class NetworkError(CertitrackError):
    """Upstream fetch failed.  Carries the HTTP status when one exists."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class SchemaMapError(CertitrackError):
    """Upstream payload did not match the expected shape."""
