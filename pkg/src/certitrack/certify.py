"""Certified enclosures of regular zeros via the Krawczyk operator.

A Moore box (x, r, A, rho) packages an exact center x, an inf-norm
radius r, an approximate inverse Jacobian A, and a contraction factor
rho.  The box is valid for a square system f when the interval Krawczyk
image

    K = -A f(x) + (I - A df(x + [-r, r]^n)) [-r, r]^n

provably lies inside the centered ball of radius rho * r.  Validity
proves that f has exactly one zero in the ball of radius r around x,
and that this zero lies within rho * r of x.

Every inclusion test here rounds its target region inward and its
operands outward, so a True predicate is a proof.  Any system object
with eval_box / jac_box / eval_mid / jac_mid methods can be certified;
nothing in this module depends on how polynomials are represented.
"""

from __future__ import annotations

from typing import Sequence

import gmpy2
from gmpy2 import mpfr, mpq

from .errors import CertifyFailed, RefineStalled
from .interval import (
    Box,
    CPoint,
    PointVec,
    ball_within_ball,
    balls_disjoint,
    box_ball,
    box_contained,
    identity_minus,
    mat_apply,
    mat_mul,
    point_matrix_to_interval,
    points_to_box,
    vec_add,
)
from .prec import Ctx, dyadic_from_hex, dyadic_to_hex, format_rational, parse_rational

_is_finite = gmpy2.is_finite

# Contraction factors used by the tracking loop: boxes are corrected to
# 1/8, a prediction step is accepted while the box still certifies at
# 7/8, and equality of zeros is decided on 1/3 shrinkage.
RHO_CORRECT = mpq(1, 8)
RHO_PREDICT = mpq(7, 8)
RHO_EQUAL = mpq(1, 3)

_MPFR_TWO = mpfr(2)


class MooreBox:
    """Certified enclosure of a single regular zero."""

    __slots__ = ("x", "r", "A", "rho")

    def __init__(self, x: PointVec, r: mpfr, A, rho):
        self.x = tuple(x)
        self.r = r
        self.A = tuple(tuple(row) for row in A)
        self.rho = mpq(rho)

    @property
    def n(self) -> int:
        return len(self.x)

    def center_norm_inf(self, ctx: Ctx) -> mpfr:
        return max(p.norm_inf(ctx) for p in self.x)

    def to_json_obj(self) -> dict:
        return {
            "x": [[dyadic_to_hex(p.re), dyadic_to_hex(p.im)] for p in self.x],
            "r": dyadic_to_hex(self.r),
            "A": [
                [[dyadic_to_hex(p.re), dyadic_to_hex(p.im)] for p in row]
                for row in self.A
            ],
            "rho": format_rational(self.rho),
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "MooreBox":
        x = tuple(CPoint(dyadic_from_hex(p[0]), dyadic_from_hex(p[1])) for p in obj["x"])
        r = dyadic_from_hex(obj["r"])
        a = tuple(
            tuple(CPoint(dyadic_from_hex(p[0]), dyadic_from_hex(p[1])) for p in row)
            for row in obj["A"]
        )
        return cls(x, r, a, parse_rational(obj["rho"]))

    def __repr__(self) -> str:
        return f"MooreBox(n={self.n}, r={self.r}, rho={self.rho})"


def mid_inverse(m: Sequence[Sequence[CPoint]], ctx: Ctx):
    """Approximate inverse of an exact complex matrix, or None."""
    n = len(m)
    ne = ctx.ne
    for row in m:
        for p in row:
            if not p.is_finite():
                return None

    def mag2(p: CPoint) -> mpfr:
        return ne.add(ne.mul(p.re, p.re), ne.mul(p.im, p.im))

    work = [list(row) + [CPoint.zero()] * n for row in m]
    one = CPoint(mpfr(1), mpfr(0))
    for i in range(n):
        work[i][n + i] = one
    for col in range(n):
        piv = max(range(col, n), key=lambda r: mag2(work[r][col]))
        if mag2(work[piv][col]) == 0:
            return None
        work[col], work[piv] = work[piv], work[col]
        inv = work[col][col]
        try:
            work[col] = [p.div(inv, ctx) for p in work[col]]
        except ZeroDivisionError:
            return None
        for r in range(n):
            if r == col:
                continue
            factor = work[r][col]
            if mag2(factor) == 0:
                continue
            work[r] = [
                work[r][j].sub(factor.mul(work[col][j], ctx), ctx)
                for j in range(2 * n)
            ]
    out = tuple(tuple(row[n:]) for row in work)
    for row in out:
        for p in row:
            if not p.is_finite():
                return None
    return out


def moore_check(system, x: PointVec, r: mpfr, a, rho, ctx: Ctx) -> bool:
    """Krawczyk inclusion test.  True is a proof; False is just False."""
    if not 0 < mpq(rho) < 1:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    if not (_is_finite(r) and r > 0):
        raise ValueError(f"radius must be positive and finite, got {r}")
    x = tuple(x)
    big_x = box_ball(x, r, ctx)
    fx = system.eval_box(points_to_box(x), ctx)
    jac = system.jac_box(big_x, ctx)
    a_iv = point_matrix_to_interval(a)
    contraction = identity_minus(mat_mul(a_iv, jac, ctx), ctx)
    neg_afx = tuple(v.neg(ctx) for v in mat_apply(a_iv, fx, ctx))
    zero = CPoint.zero()
    r_ball = box_ball((zero,) * len(x), r, ctx)
    k_image = vec_add(neg_afx, mat_apply(contraction, r_ball, ctx), ctx)
    bound = ctx.dn.mul(ctx.to_dn(mpq(rho)), r)
    return box_contained(k_image, (zero,) * len(x), bound, ctx)


def _newton_recenter(system, x: PointVec, a, ctx: Ctx):
    """One Newton step x - A f(x); returns the new point and step size."""
    fx = system.eval_mid(x, ctx)
    out = []
    step_norm = mpfr(0)
    for i in range(len(x)):
        acc = a[i][0].mul(fx[0], ctx)
        for j in range(1, len(fx)):
            acc = acc.add(a[i][j].mul(fx[j], ctx), ctx)
        step_norm = max(step_norm, acc.norm_inf(ctx))
        out.append(x[i].sub(acc, ctx))
    return tuple(out), step_norm


def _radius_floor(x: PointVec, ctx: Ctx) -> mpfr:
    scale = ctx.ne.add(mpfr(1), max(p.norm_inf(ctx) for p in x))
    return ctx.ne.mul(scale, ctx.to_ne(mpq(1, 1 << (ctx.prec + 16))))


def refine(system, m: MooreBox, tau, ctx: Ctx, max_iter: int = 64) -> MooreBox:
    """Re-certify the same zero at contraction factor tau.

    Alternates Newton recentering with radius halving and occasional
    reseeding of the approximate inverse.  Newton moves are heuristic;
    what pins the zero is the exit condition: the returned box's
    shrunken ball must lie inside the original certified ball, whose
    zero is unique.  Raises RefineStalled when tau is out of reach at
    this precision.
    """
    tau = mpq(tau)
    if not 0 < tau < 1:
        raise ValueError(f"contraction factor must be in (0, 1), got {tau}")
    anchor_x, anchor_r = m.x, m.r
    x, r, a = m.x, m.r, m.A
    floor = _radius_floor(x, ctx)
    small = ctx.to_ne(mpq(1, 64))
    fails = 0
    for _ in range(max_iter):
        if moore_check(system, x, r, a, tau, ctx):
            cand = MooreBox(x, r, a, tau)
            if ball_within_ball(x, shrunken_radius(cand, ctx), anchor_x, anchor_r, ctx):
                return cand
        fails += 1
        if fails >= 2:
            # a stale approximate inverse wastes the whole contraction
            # budget; refresh it before touching the radius
            reseeded = mid_inverse(system.jac_mid(x, ctx), ctx)
            if reseeded is not None:
                a = reseeded
        stepped, step_norm = _newton_recenter(system, x, a, ctx)
        moved = all(p.is_finite() for p in stepped)
        if moved:
            x = stepped
        # Halve the radius only once recentering has converged: while the
        # Newton step is still large the failure is residual, not radius.
        converged = moved and step_norm <= ctx.ne.mul(r, small)
        if (converged or not moved) and fails >= 3:
            r = ctx.ne.div(r, _MPFR_TWO)
            if r < floor:
                raise RefineStalled(
                    f"radius fell below the precision floor at {ctx.prec} bits"
                )
    raise RefineStalled(f"no certification at tau={tau} after {max_iter} rounds")


def certify_approx(system, xhat: PointVec, ctx: Ctx) -> MooreBox:
    """Build a 1/3-Moore box from an uncertified approximation.

    Up to five Newton polish steps, then a radius search downward from
    2^-4 (1 + |x|) over at most forty halvings.
    """
    x = tuple(xhat)
    if not all(p.is_finite() for p in x):
        raise CertifyFailed("approximation has non-finite coordinates")
    eps = ctx.to_ne(mpq(1, 1 << max(ctx.prec - 4, 4)))
    for _ in range(5):
        a = mid_inverse(system.jac_mid(x, ctx), ctx)
        if a is None:
            break
        cand, step = _newton_recenter(system, x, a, ctx)
        if not all(p.is_finite() for p in cand):
            break
        x = cand
        scale = ctx.ne.add(mpfr(1), max(p.norm_inf(ctx) for p in x))
        if step <= ctx.ne.mul(eps, scale):
            break
    a = mid_inverse(system.jac_mid(x, ctx), ctx)
    if a is None:
        raise CertifyFailed("Jacobian is singular at the approximation")
    scale = ctx.ne.add(mpfr(1), max(p.norm_inf(ctx) for p in x))
    r = ctx.ne.mul(scale, ctx.to_ne(mpq(1, 16)))
    for _ in range(41):
        if moore_check(system, x, r, a, RHO_EQUAL, ctx):
            return MooreBox(x, r, a, RHO_EQUAL)
        r = ctx.ne.div(r, _MPFR_TWO)
    raise CertifyFailed("no certified radius found near the approximation")


def shrunken_radius(m: MooreBox, ctx: Ctx) -> mpfr:
    """Upper bound on rho * r: the zero lies within this of the center."""
    return ctx.up.mul(m.r, ctx.to_up(m.rho))


def same_zero(system, m1: MooreBox, m2: MooreBox, ctx: Ctx, rounds: int = 4) -> bool:
    """Decide whether two Moore boxes certify the same zero.

    Compares the 1/3-shrunken balls: provably disjoint means different
    zeros; one shrunken ball inside the other full ball means the same
    zero by uniqueness.  Knife-edge cases refine tighter and retry.
    """
    if m1.n != m2.n:
        raise ValueError("boxes have different dimensions")
    tau = RHO_EQUAL
    for _ in range(rounds):
        m1 = refine(system, m1, tau, ctx)
        m2 = refine(system, m2, tau, ctx)
        s1 = shrunken_radius(m1, ctx)
        s2 = shrunken_radius(m2, ctx)
        if balls_disjoint(m1.x, s1, m2.x, s2, ctx):
            return False
        if ball_within_ball(m2.x, s2, m1.x, m1.r, ctx):
            return True
        if ball_within_ball(m1.x, s1, m2.x, m2.r, ctx):
            return True
        tau = tau / 4
    raise RefineStalled("boxes can be neither separated nor fused at this precision")


def project_box(system_enl, system_red, m: MooreBox, ctx: Ctx) -> MooreBox:
    """Project a box for the enlarged system down to the reduced one.

    The enlarged system appends its auxiliary variable last, so the
    projection drops the final coordinate and re-certifies.
    """
    if system_enl.n != system_red.n + 1:
        raise ValueError(
            f"dimension mismatch: {system_enl.n} is not {system_red.n} + 1"
        )
    return certify_approx(system_red, m.x[:-1], ctx)
