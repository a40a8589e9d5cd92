"""Working-precision contexts with directed rounding.

All floating point in this library is MPFR (via gmpy2) at an explicit
mantissa precision.  A Ctx bundles three gmpy2 contexts at one
precision: round-down, round-up, round-to-nearest.  Operations that
must be outward-safe call methods on ``ctx.dn`` / ``ctx.up``
explicitly; nothing ever installs a global rounding mode, so the code
is safe to run from multiple threads.
"""

from __future__ import annotations

from fractions import Fraction

import gmpy2
from gmpy2 import mpfr, mpq

_MPFR_ZERO = mpfr(0)


class Ctx:
    """Bundle of gmpy2 contexts at a fixed mantissa precision.

    dn: rounds toward -inf.  up: rounds toward +inf.  ne: to nearest.
    """

    __slots__ = ("prec", "dn", "up", "ne")

    def __init__(self, prec: int = 53):
        if prec < 4:
            raise ValueError(f"precision must be at least 4 bits, got {prec}")
        self.prec = int(prec)
        self.dn = gmpy2.context(precision=self.prec, round=gmpy2.RoundDown)
        self.up = gmpy2.context(precision=self.prec, round=gmpy2.RoundUp)
        self.ne = gmpy2.context(precision=self.prec, round=gmpy2.RoundToNearest)

    def double(self) -> "Ctx":
        return Ctx(2 * self.prec)

    # Directed conversions.  gmpy2 context arithmetic on two exact
    # operands (mpq, int) stays exact, so adding mpfr(0) forces the
    # result through MPFR rounding at this precision.
    def to_dn(self, x) -> mpfr:
        return self.dn.add(x, _MPFR_ZERO)

    def to_up(self, x) -> mpfr:
        return self.up.add(x, _MPFR_ZERO)

    def to_ne(self, x) -> mpfr:
        return self.ne.add(x, _MPFR_ZERO)

    def __repr__(self) -> str:
        return f"Ctx(prec={self.prec})"


def parse_rational(text: str) -> mpq:
    """Parse 'a/b', integer, or decimal text into an exact rational."""
    s = text.strip()
    if not s:
        raise ValueError("empty rational literal")
    try:
        if "/" in s:
            num, den = s.split("/", 1)
            q = mpq(int(num.strip()), int(den.strip()))
        elif "." in s or "e" in s or "E" in s:
            q = mpq(Fraction(s))
        else:
            q = mpq(int(s))
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"bad rational literal {text!r}: {exc}") from None
    return q


def format_rational(q: mpq) -> str:
    q = mpq(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def dyadic_to_hex(x: mpfr) -> str:
    """Serialize a finite mpfr exactly as '<sign>0x<mant>p<exp>'."""
    if not gmpy2.is_finite(x):
        raise ValueError("cannot serialize a non-finite value")
    if x == 0:
        return "0x0p+0"
    num, den = x.as_integer_ratio()
    exp = den.bit_length() - 1  # den is a power of two
    sign = "-" if num < 0 else ""
    return f"{sign}0x{abs(num):x}p-{exp}" if exp else f"{sign}0x{abs(num):x}p+0"


def dyadic_from_hex(text: str) -> mpfr:
    """Inverse of dyadic_to_hex; the result is exact."""
    s = text.strip()
    neg = s.startswith("-")
    if neg:
        s = s[1:]
    if not s.startswith("0x") or "p" not in s:
        raise ValueError(f"bad dyadic literal {text!r}")
    mant_s, exp_s = s[2:].split("p", 1)
    mant = int(mant_s, 16)
    exp = int(exp_s)
    if mant == 0:
        return mpfr(0)
    if exp >= 0:
        q = mpq(mant * (1 << exp))
    else:
        q = mpq(mant, 1 << (-exp))
    if neg:
        q = -q
    return mpfr(q, precision=max(mant.bit_length(), 4))
