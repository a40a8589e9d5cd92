"""Outward-rounded interval arithmetic over MPFR floats.

Real intervals are pairs of mpfr endpoints; complex intervals are
rectangles (a real interval for each of the real and imaginary parts).
Every arithmetic operation takes an explicit Ctx and rounds the lower
endpoint down and the upper endpoint up, so the exact result of the
operation on any members of the inputs is contained in the output.

Any overflow or invalid operation poisons the result: the interval
becomes [-inf, +inf] with ok=False, and every certification predicate
in this module returns False for poisoned inputs.  A lost bound can
therefore never turn into a claimed proof.

Exact midpoints are represented by CPoint (a pair of mpfr values, zero
width).  Bare python operators on mpfr round at the ambient thread
context, not ours, so all arithmetic here goes through Ctx methods.
"""

from __future__ import annotations

from typing import Sequence

import gmpy2
from gmpy2 import mpfr

from .errors import IntervalDivisionByZero
from .prec import Ctx

_is_finite = gmpy2.is_finite
_NINF = mpfr("-inf")
_PINF = mpfr("+inf")
_ZERO = mpfr(0)
_ONE = mpfr(1)
_TWO = mpfr(2)


class RealInterval:
    __slots__ = ("lo", "hi", "ok")

    def __init__(self, lo: mpfr, hi: mpfr):
        if _is_finite(lo) and _is_finite(hi) and lo <= hi:
            self.lo = lo
            self.hi = hi
            self.ok = True
        else:
            self.lo = _NINF
            self.hi = _PINF
            self.ok = False

    @classmethod
    def point(cls, x: mpfr) -> "RealInterval":
        return cls(x, x)

    @classmethod
    def from_rational(cls, q, ctx: Ctx) -> "RealInterval":
        return cls(ctx.to_dn(q), ctx.to_up(q))

    # ------------------------------------------------------------ arithmetic

    def add(self, o: "RealInterval", ctx: Ctx) -> "RealInterval":
        return RealInterval(ctx.dn.add(self.lo, o.lo), ctx.up.add(self.hi, o.hi))

    def sub(self, o: "RealInterval", ctx: Ctx) -> "RealInterval":
        return RealInterval(ctx.dn.sub(self.lo, o.hi), ctx.up.sub(self.hi, o.lo))

    def neg(self, ctx: Ctx) -> "RealInterval":
        return RealInterval(ctx.dn.minus(self.hi), ctx.up.minus(self.lo))

    def mul(self, o: "RealInterval", ctx: Ctx) -> "RealInterval":
        # sign-dispatched case table, two rounded products per case
        # except mixed*mixed; endpoints are finite whenever ok holds
        if not (self.ok and o.ok):
            return _RPOISON
        a, b, c, d = self.lo, self.hi, o.lo, o.hi
        dn = ctx.dn.mul
        up = ctx.up.mul
        if a >= 0:
            if c >= 0:
                return RealInterval(dn(a, c), up(b, d))
            if d <= 0:
                return RealInterval(dn(b, c), up(a, d))
            return RealInterval(dn(b, c), up(b, d))
        if b <= 0:
            if c >= 0:
                return RealInterval(dn(a, d), up(b, c))
            if d <= 0:
                return RealInterval(dn(b, d), up(a, c))
            return RealInterval(dn(a, d), up(a, c))
        if c >= 0:
            return RealInterval(dn(a, d), up(b, d))
        if d <= 0:
            return RealInterval(dn(b, c), up(a, c))
        return RealInterval(min(dn(a, d), dn(b, c)), max(up(a, c), up(b, d)))

    def sqr(self, ctx: Ctx) -> "RealInterval":
        """Tight enclosure of {x^2 : x in self}."""
        if not self.ok:
            return _RPOISON
        a, b = self.lo, self.hi
        if a >= 0:
            return RealInterval(ctx.dn.mul(a, a), ctx.up.mul(b, b))
        if b <= 0:
            return RealInterval(ctx.dn.mul(b, b), ctx.up.mul(a, a))
        return RealInterval(_ZERO, max(ctx.up.mul(a, a), ctx.up.mul(b, b)))

    def recip(self, ctx: Ctx) -> "RealInterval":
        if not self.ok:
            return _RPOISON
        if self.lo <= 0 <= self.hi:
            raise IntervalDivisionByZero(f"interval {self} contains zero")
        return RealInterval(ctx.dn.div(_ONE, self.hi), ctx.up.div(_ONE, self.lo))

    def div(self, o: "RealInterval", ctx: Ctx) -> "RealInterval":
        return self.mul(o.recip(ctx), ctx)

    # ------------------------------------------------------------ predicates

    def contains_zero(self) -> bool:
        return self.lo <= 0 <= self.hi

    def contains(self, q) -> bool:
        """Exact membership test for a rational or mpfr value."""
        return self.lo <= q <= self.hi

    def intersects(self, o: "RealInterval") -> bool:
        return self.lo <= o.hi and o.lo <= self.hi

    def is_point(self) -> bool:
        return self.ok and self.lo == self.hi

    # -------------------------------------------------------------- metrics

    def mid(self, ctx: Ctx) -> mpfr:
        if self.lo == self.hi:
            return self.lo
        return ctx.ne.div(ctx.ne.add(self.lo, self.hi), _TWO)

    def width_up(self, ctx: Ctx) -> mpfr:
        return ctx.up.sub(self.hi, self.lo)

    def mag_up(self, ctx: Ctx) -> mpfr:
        """Upper bound on |x| over the interval."""
        if not self.ok:
            return _PINF
        lo_abs = ctx.up.minus(self.lo) if self.lo < 0 else self.lo
        hi_abs = ctx.up.minus(self.hi) if self.hi < 0 else self.hi
        return max(lo_abs, hi_abs)

    def hull(self, o: "RealInterval") -> "RealInterval":
        return RealInterval(min(self.lo, o.lo), max(self.hi, o.hi))

    def __eq__(self, o) -> bool:
        if not isinstance(o, RealInterval):
            return NotImplemented
        return self.ok == o.ok and self.lo == o.lo and self.hi == o.hi

    def __hash__(self):
        return hash((str(self.lo), str(self.hi)))

    def __repr__(self) -> str:
        return f"[{self.lo}, {self.hi}]"


_RPOISON = RealInterval(_NINF, _PINF)
_RZERO = RealInterval(_ZERO, _ZERO)
_RONE = RealInterval(_ONE, _ONE)


class CPoint:
    """Exact complex point: a pair of mpfr values, no width."""

    __slots__ = ("re", "im")

    def __init__(self, re: mpfr, im: mpfr):
        self.re = re
        self.im = im

    @classmethod
    def from_rationals(cls, re_q, im_q, ctx: Ctx) -> "CPoint":
        return cls(ctx.to_ne(re_q), ctx.to_ne(im_q))

    @classmethod
    def zero(cls) -> "CPoint":
        return cls(_ZERO, _ZERO)

    def add(self, o: "CPoint", ctx: Ctx) -> "CPoint":
        ne = ctx.ne
        return CPoint(ne.add(self.re, o.re), ne.add(self.im, o.im))

    def sub(self, o: "CPoint", ctx: Ctx) -> "CPoint":
        ne = ctx.ne
        return CPoint(ne.sub(self.re, o.re), ne.sub(self.im, o.im))

    def mul(self, o: "CPoint", ctx: Ctx) -> "CPoint":
        ne = ctx.ne
        return CPoint(
            ne.sub(ne.mul(self.re, o.re), ne.mul(self.im, o.im)),
            ne.add(ne.mul(self.re, o.im), ne.mul(self.im, o.re)),
        )

    def div(self, o: "CPoint", ctx: Ctx) -> "CPoint":
        ne = ctx.ne
        den = ne.add(ne.mul(o.re, o.re), ne.mul(o.im, o.im))
        if den == 0:
            raise ZeroDivisionError("complex division by zero")
        re = ne.add(ne.mul(self.re, o.re), ne.mul(self.im, o.im))
        im = ne.sub(ne.mul(self.im, o.re), ne.mul(self.re, o.im))
        return CPoint(ne.div(re, den), ne.div(im, den))

    def neg(self, ctx: Ctx) -> "CPoint":
        ne = ctx.ne
        return CPoint(ne.minus(self.re), ne.minus(self.im))

    def norm_inf(self, ctx: Ctx) -> mpfr:
        re_abs = ctx.up.minus(self.re) if self.re < 0 else self.re
        im_abs = ctx.up.minus(self.im) if self.im < 0 else self.im
        return max(re_abs, im_abs)

    def to_interval(self) -> "ComplexInterval":
        return ComplexInterval(RealInterval.point(self.re), RealInterval.point(self.im))

    def is_finite(self) -> bool:
        return _is_finite(self.re) and _is_finite(self.im)

    def __eq__(self, o) -> bool:
        if not isinstance(o, CPoint):
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((str(self.re), str(self.im)))

    def __repr__(self) -> str:
        return f"({self.re} + {self.im}j)"


class ComplexInterval:
    """Axis-aligned rectangle in C: re and im are real intervals."""

    __slots__ = ("re", "im")

    def __init__(self, re: RealInterval, im: RealInterval):
        self.re = re
        self.im = im

    @classmethod
    def from_rationals(cls, re_q, im_q, ctx: Ctx) -> "ComplexInterval":
        return cls(RealInterval.from_rational(re_q, ctx), RealInterval.from_rational(im_q, ctx))

    @classmethod
    def point(cls, p: CPoint) -> "ComplexInterval":
        return p.to_interval()

    @classmethod
    def zero(cls) -> "ComplexInterval":
        return cls(_RZERO, _RZERO)

    @classmethod
    def one(cls) -> "ComplexInterval":
        return cls(_RONE, _RZERO)

    @property
    def ok(self) -> bool:
        return self.re.ok and self.im.ok

    # ------------------------------------------------------------ arithmetic

    def add(self, o: "ComplexInterval", ctx: Ctx) -> "ComplexInterval":
        return ComplexInterval(self.re.add(o.re, ctx), self.im.add(o.im, ctx))

    def sub(self, o: "ComplexInterval", ctx: Ctx) -> "ComplexInterval":
        return ComplexInterval(self.re.sub(o.re, ctx), self.im.sub(o.im, ctx))

    def neg(self, ctx: Ctx) -> "ComplexInterval":
        return ComplexInterval(self.re.neg(ctx), self.im.neg(ctx))

    def conj(self, ctx: Ctx) -> "ComplexInterval":
        return ComplexInterval(self.re, self.im.neg(ctx))

    def mul(self, o: "ComplexInterval", ctx: Ctx) -> "ComplexInterval":
        ac = self.re.mul(o.re, ctx)
        bd = self.im.mul(o.im, ctx)
        ad = self.re.mul(o.im, ctx)
        bc = self.im.mul(o.re, ctx)
        return ComplexInterval(ac.sub(bd, ctx), ad.add(bc, ctx))

    def sqr(self, ctx: Ctx) -> "ComplexInterval":
        # re^2 - im^2 via dedicated interval squares for tightness
        re2 = self.re.sqr(ctx)
        im2 = self.im.sqr(ctx)
        cross = self.re.mul(self.im, ctx)
        return ComplexInterval(re2.sub(im2, ctx), cross.mul(_R2, ctx))

    def abs2(self, ctx: Ctx) -> RealInterval:
        """Enclosure of |z|^2."""
        return self.re.sqr(ctx).add(self.im.sqr(ctx), ctx)

    def div(self, o: "ComplexInterval", ctx: Ctx) -> "ComplexInterval":
        den = o.abs2(ctx)
        if not den.ok:
            return _CPOISON
        if den.contains_zero():
            raise IntervalDivisionByZero("divisor interval may contain zero")
        inv = den.recip(ctx)
        num = self.mul(o.conj(ctx), ctx)
        return ComplexInterval(num.re.mul(inv, ctx), num.im.mul(inv, ctx))

    def scale_int(self, k: int, ctx: Ctx) -> "ComplexInterval":
        if k == 0:
            return ComplexInterval.zero()
        kk = RealInterval(ctx.to_dn(k), ctx.to_up(k))
        return ComplexInterval(self.re.mul(kk, ctx), self.im.mul(kk, ctx))

    # ------------------------------------------------------------ predicates

    def contains_zero(self) -> bool:
        return self.re.contains_zero() and self.im.contains_zero()

    def contains(self, re_q, im_q) -> bool:
        return self.re.contains(re_q) and self.im.contains(im_q)

    def intersects(self, o: "ComplexInterval") -> bool:
        return self.re.intersects(o.re) and self.im.intersects(o.im)

    def is_point(self) -> bool:
        return self.re.is_point() and self.im.is_point()

    # -------------------------------------------------------------- metrics

    def mid(self, ctx: Ctx) -> CPoint:
        return CPoint(self.re.mid(ctx), self.im.mid(ctx))

    def width_up(self, ctx: Ctx) -> mpfr:
        return max(self.re.width_up(ctx), self.im.width_up(ctx))

    def mag_up(self, ctx: Ctx) -> mpfr:
        return max(self.re.mag_up(ctx), self.im.mag_up(ctx))

    def hull(self, o: "ComplexInterval") -> "ComplexInterval":
        return ComplexInterval(self.re.hull(o.re), self.im.hull(o.im))

    def __eq__(self, o) -> bool:
        if not isinstance(o, ComplexInterval):
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __repr__(self) -> str:
        return f"({self.re} + {self.im}i)"


_R2 = RealInterval(_TWO, _TWO)
_CPOISON = ComplexInterval(_RPOISON, _RPOISON)

Box = tuple  # tuple[ComplexInterval, ...]
PointVec = tuple  # tuple[CPoint, ...]


def ci_arith(op: str, a: ComplexInterval, b: ComplexInterval, ctx: Ctx) -> ComplexInterval:
    """Dispatch a binary complex-interval operation by name."""
    if op == "add":
        return a.add(b, ctx)
    if op == "sub":
        return a.sub(b, ctx)
    if op == "mul":
        return a.mul(b, ctx)
    if op == "div":
        return a.div(b, ctx)
    if op == "neg":
        return a.neg(ctx)
    raise ValueError(f"unknown operation {op!r}")


# ------------------------------------------------------------ box helpers


def box_ball(center: Sequence[CPoint], r: mpfr, ctx: Ctx) -> Box:
    """Outward enclosure of the inf-norm ball of radius r around center."""
    out = []
    for c in center:
        out.append(
            ComplexInterval(
                RealInterval(ctx.dn.sub(c.re, r), ctx.up.add(c.re, r)),
                RealInterval(ctx.dn.sub(c.im, r), ctx.up.add(c.im, r)),
            )
        )
    return tuple(out)


def box_contained(box: Box, center: Sequence[CPoint], s: mpfr, ctx: Ctx) -> bool:
    """True only if box provably lies in the closed ball of radius s.

    The target region is rounded inward, so a True answer is a proof
    regardless of rounding.  Poisoned components always fail.
    """
    if not _is_finite(s):
        return False
    for iv, c in zip(box, center):
        if not (iv.re.ok and iv.im.ok):
            return False
        if iv.re.lo < ctx.up.sub(c.re, s) or iv.re.hi > ctx.dn.add(c.re, s):
            return False
        if iv.im.lo < ctx.up.sub(c.im, s) or iv.im.hi > ctx.dn.add(c.im, s):
            return False
    return True


def ball_within_ball(
    c2: Sequence[CPoint], s2: mpfr, c1: Sequence[CPoint], r1: mpfr, ctx: Ctx
) -> bool:
    """True only if ball(c2, s2) provably lies inside ball(c1, r1)."""
    if not (_is_finite(s2) and _is_finite(r1)):
        return False
    up = ctx.up
    for p2, p1 in zip(c2, c1):
        for a, b in ((p2.re, p1.re), (p2.im, p1.im)):
            d = max(up.sub(a, b), up.sub(b, a))  # upper bound on |a - b|
            if up.add(d, s2) > r1:
                return False
    return True


def balls_disjoint(
    c1: Sequence[CPoint], s1: mpfr, c2: Sequence[CPoint], s2: mpfr, ctx: Ctx
) -> bool:
    """True only if the two balls are provably disjoint.

    Disjointness in a single coordinate of a single component suffices.
    """
    if not (_is_finite(s1) and _is_finite(s2)):
        return False
    dn = ctx.dn
    up = ctx.up
    for p1, p2 in zip(c1, c2):
        for a, b in ((p1.re, p2.re), (p1.im, p2.im)):
            if up.add(a, s1) < dn.sub(b, s2):
                return True
            if up.add(b, s2) < dn.sub(a, s1):
                return True
    return False


def box_hull(u: Box, v: Box) -> Box:
    return tuple(a.hull(b) for a, b in zip(u, v))


def box_is_finite(u: Box) -> bool:
    return all(iv.ok for iv in u)


def points_to_box(xs: Sequence[CPoint]) -> Box:
    return tuple(p.to_interval() for p in xs)


# ------------------------------------------------- interval linear algebra


def mat_apply(m: Sequence[Sequence[ComplexInterval]], v: Box, ctx: Ctx) -> Box:
    out = []
    for row in m:
        acc = row[0].mul(v[0], ctx)
        for j in range(1, len(v)):
            acc = acc.add(row[j].mul(v[j], ctx), ctx)
        out.append(acc)
    return tuple(out)


def mat_mul(
    a: Sequence[Sequence[ComplexInterval]],
    b: Sequence[Sequence[ComplexInterval]],
    ctx: Ctx,
) -> tuple:
    n = len(a)
    k = len(b[0])
    out = []
    for i in range(n):
        row = []
        for j in range(k):
            acc = a[i][0].mul(b[0][j], ctx)
            for l in range(1, len(b)):
                acc = acc.add(a[i][l].mul(b[l][j], ctx), ctx)
            row.append(acc)
        out.append(tuple(row))
    return tuple(out)


def identity_minus(m: Sequence[Sequence[ComplexInterval]], ctx: Ctx) -> tuple:
    one = ComplexInterval.one()
    out = []
    for i, row in enumerate(m):
        new_row = []
        for j, entry in enumerate(row):
            if i == j:
                new_row.append(one.sub(entry, ctx))
            else:
                new_row.append(entry.neg(ctx))
        out.append(tuple(new_row))
    return tuple(out)


def point_matrix_to_interval(a: Sequence[Sequence[CPoint]]) -> tuple:
    return tuple(tuple(p.to_interval() for p in row) for row in a)


def vec_add(u: Box, v: Box, ctx: Ctx) -> Box:
    return tuple(a.add(b, ctx) for a, b in zip(u, v))
