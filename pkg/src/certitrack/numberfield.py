"""Exact arithmetic in Q(nu) and certified complex embeddings.

A NumberField is defined by a squarefree monic polynomial with rational
coefficients; elements are residues represented on the power basis.
Irreducibility is not checked up front: inverting a zero divisor of a
reducible quotient fails with NotInvertible, which is the deliberate,
lazy detection point.

embed_root turns a decimal approximation of a root into a certified
complex interval with a Moore box proof, retrying at doubled precision
until the requested width is reached.
"""

from __future__ import annotations

from typing import Sequence

from gmpy2 import mpfr, mpq

from .certify import MooreBox, RHO_EQUAL, certify_approx, moore_check
from .errors import CertifyFailed, InverseOfZero, IsolationFailed, NotInvertible
from .interval import ComplexInterval, CPoint, RealInterval
from .prec import Ctx

# ---------------------------------------------------- dense rational polys
# Coefficient lists run from the constant term upward.


def _strip(p: list) -> list:
    while p and p[-1] == 0:
        p.pop()
    return p


def _padd(p: list, q: list) -> list:
    n = max(len(p), len(q))
    out = [mpq(0)] * n
    for i, c in enumerate(p):
        out[i] += c
    for i, c in enumerate(q):
        out[i] += c
    return _strip(out)


def _pscale(p: list, c) -> list:
    if c == 0:
        return []
    return [x * c for x in p]


def _pmul(p: list, q: list) -> list:
    if not p or not q:
        return []
    out = [mpq(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        for j, b in enumerate(q):
            out[i + j] += a * b
    return _strip(out)


def _pdivmod(p: list, q: list) -> tuple[list, list]:
    if not q:
        raise ZeroDivisionError("polynomial division by zero")
    rem = list(p)
    quo = [mpq(0)] * max(len(p) - len(q) + 1, 0)
    dq = len(q) - 1
    lead = q[-1]
    while len(rem) - 1 >= dq and rem:
        k = len(rem) - 1 - dq
        c = rem[-1] / lead
        quo[k] = c
        for i in range(len(q)):
            rem[k + i] -= c * q[i]
        _strip(rem)
    return _strip(quo), rem


def _pgcd(p: list, q: list) -> list:
    a, b = list(p), list(q)
    while b:
        _, r = _pdivmod(a, b)
        a, b = b, r
    if a:
        lead = a[-1]
        a = [c / lead for c in a]
    return a


def _pderiv(p: list) -> list:
    return _strip([p[i] * i for i in range(1, len(p))])


class NumberField:
    """Q(nu) for nu a root of a squarefree monic polynomial."""

    __slots__ = ("min_poly", "degree")

    def __init__(self, coeffs: Sequence):
        poly = _strip([mpq(c) for c in coeffs])
        if len(poly) < 2:
            raise ValueError("defining polynomial must have degree at least 1")
        lead = poly[-1]
        poly = [c / lead for c in poly]
        if len(_pgcd(poly, _pderiv(poly))) > 1:
            raise ValueError("defining polynomial is not squarefree")
        self.min_poly = tuple(poly)
        self.degree = len(poly) - 1

    def zero(self) -> "NFElement":
        return NFElement(self, (mpq(0),) * self.degree)

    def one(self) -> "NFElement":
        return NFElement.from_rational(self, mpq(1))

    def gen(self) -> "NFElement":
        if self.degree == 1:
            return NFElement(self, (-self.min_poly[0],))
        coeffs = [mpq(0)] * self.degree
        coeffs[1] = mpq(1)
        return NFElement(self, tuple(coeffs))

    def element(self, coeffs: Sequence) -> "NFElement":
        cs = [mpq(c) for c in coeffs]
        if len(cs) > self.degree:
            raise ValueError(
                f"element needs at most {self.degree} coordinates, got {len(cs)}"
            )
        cs += [mpq(0)] * (self.degree - len(cs))
        return NFElement(self, tuple(cs))

    def __eq__(self, o) -> bool:
        if not isinstance(o, NumberField):
            return NotImplemented
        return self.min_poly == o.min_poly

    def __hash__(self):
        return hash(self.min_poly)

    def __repr__(self) -> str:
        return f"NumberField(degree={self.degree})"


class NFElement:
    """Element of a number field on the power basis 1, nu, nu^2, ..."""

    __slots__ = ("field", "coeffs")

    def __init__(self, field: NumberField, coeffs: tuple):
        if len(coeffs) != field.degree:
            raise ValueError("coordinate vector has the wrong length")
        self.field = field
        self.coeffs = tuple(mpq(c) for c in coeffs)

    @classmethod
    def from_rational(cls, field: NumberField, q) -> "NFElement":
        coeffs = [mpq(q)] + [mpq(0)] * (field.degree - 1)
        return cls(field, tuple(coeffs))

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coeffs)

    def is_rational(self) -> bool:
        return all(c == 0 for c in self.coeffs[1:])

    def _check(self, o: "NFElement"):
        if self.field != o.field:
            raise ValueError("elements belong to different fields")

    def __add__(self, o):
        if isinstance(o, (int, mpq)):
            o = NFElement.from_rational(self.field, mpq(o))
        self._check(o)
        return NFElement(self.field, tuple(a + b for a, b in zip(self.coeffs, o.coeffs)))

    def __sub__(self, o):
        if isinstance(o, (int, mpq)):
            o = NFElement.from_rational(self.field, mpq(o))
        self._check(o)
        return NFElement(self.field, tuple(a - b for a, b in zip(self.coeffs, o.coeffs)))

    def __neg__(self):
        return NFElement(self.field, tuple(-a for a in self.coeffs))

    def __mul__(self, o):
        if isinstance(o, (int, mpq)):
            return NFElement(self.field, tuple(a * mpq(o) for a in self.coeffs))
        self._check(o)
        prod = _pmul(list(self.coeffs), list(o.coeffs))
        _, rem = _pdivmod(prod, list(self.field.min_poly))
        rem += [mpq(0)] * (self.field.degree - len(rem))
        return NFElement(self.field, tuple(rem))

    __radd__ = __add__
    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, (int, mpq)):
            if o == 0:
                raise InverseOfZero("division by zero")
            return NFElement(self.field, tuple(a / mpq(o) for a in self.coeffs))
        return self * o.inv()

    def __pow__(self, k: int):
        if k < 0:
            return self.inv() ** (-k)
        out = self.field.one()
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def inv(self) -> "NFElement":
        """Inverse via the extended Euclidean algorithm.

        A nonconstant gcd with the defining polynomial means the
        element is a zero divisor, i.e. the field definition was
        reducible; this is where that is detected.
        """
        if self.is_zero():
            raise InverseOfZero("inverse of zero")
        a = _strip(list(self.coeffs))
        m = list(self.field.min_poly)
        old_r, r = a, m
        old_s, s = [mpq(1)], []
        while r:
            q, rem = _pdivmod(old_r, r)
            old_r, r = r, rem
            old_s, s = s, _padd(old_s, _pscale(_pmul(q, s), mpq(-1)))
        if len(old_r) > 1:
            raise NotInvertible(
                "element shares a factor with the defining polynomial; "
                "the defining polynomial is reducible"
            )
        g = old_r[0]
        inv_coeffs = [c / g for c in old_s]
        _, rem = _pdivmod(inv_coeffs, m)
        rem += [mpq(0)] * (self.field.degree - len(rem))
        return NFElement(self.field, tuple(rem[: self.field.degree]))

    def __eq__(self, o) -> bool:
        if isinstance(o, (int, mpq)):
            o = NFElement.from_rational(self.field, mpq(o))
        if not isinstance(o, NFElement):
            return NotImplemented
        return self.field == o.field and self.coeffs == o.coeffs

    def __hash__(self):
        return hash((self.field, self.coeffs))

    def __repr__(self) -> str:
        return f"NFElement({list(map(str, self.coeffs))})"


def nf_arith(op: str, a: NFElement, b: NFElement) -> NFElement:
    """Dispatch a field operation by name."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    if op == "neg":
        return -a
    raise ValueError(f"unknown operation {op!r}")


# --------------------------------------------- polynomials over the field


def _nf_strip(p: list) -> list:
    while p and p[-1].is_zero():
        p.pop()
    return p


def _nf_divmod(p: list, q: list) -> tuple[list, list]:
    if not q:
        raise ZeroDivisionError("polynomial division by zero")
    field = q[-1].field
    rem = list(p)
    dq = len(q) - 1
    lead_inv = q[-1].inv()
    quo = [field.zero()] * max(len(rem) - dq, 0)
    while rem and len(rem) - 1 >= dq:
        k = len(rem) - 1 - dq
        c = rem[-1] * lead_inv
        quo[k] = c
        for i in range(len(q)):
            rem[k + i] = rem[k + i] - c * q[i]
        _nf_strip(rem)
    return quo, rem


def resultant(p: Sequence[NFElement], q: Sequence[NFElement]) -> NFElement:
    """Resultant of two univariate polynomials over the field.

    Zero exactly when the polynomials share a root, which is the
    coprimality test used on map numerators and denominators.
    """
    p = _nf_strip(list(p))
    q = _nf_strip(list(q))
    if not p or not q:
        if p:
            return p[-1].field.zero()
        if q:
            return q[-1].field.zero()
        raise ValueError("resultant of two zero polynomials")
    field = p[-1].field
    m, n = len(p) - 1, len(q) - 1
    if n == 0:
        return q[0] ** m
    if m == 0:
        return p[0] ** n
    _, r = _nf_divmod(p, q)
    if not r:
        return field.zero()
    k = len(r) - 1
    sign = field.one() if (m * n) % 2 == 0 else -field.one()
    return sign * (q[-1] ** (m - k)) * resultant(q, r)


# -------------------------------------------------------------- embeddings


class _MinPolySystem:
    """Univariate system wrapper for the defining polynomial.

    Implements the evaluation protocol certify expects, with interval
    coefficients converted outward at a fixed precision.
    """

    __slots__ = ("coeffs", "dcoeffs", "mids", "dmids", "n")

    def __init__(self, poly: Sequence, ctx: Ctx):
        self.n = 1
        self.coeffs = [ComplexInterval.from_rationals(mpq(c), 0, ctx) for c in poly]
        self.dcoeffs = [
            self.coeffs[i].scale_int(i, ctx) for i in range(1, len(self.coeffs))
        ]
        self.mids = [CPoint.from_rationals(mpq(c), 0, ctx) for c in poly]
        self.dmids = [
            CPoint.from_rationals(i * mpq(poly[i]), 0, ctx)
            for i in range(1, len(poly))
        ]

    @staticmethod
    def _horner_iv(coeffs, x, ctx):
        acc = coeffs[-1]
        for c in reversed(coeffs[:-1]):
            acc = acc.mul(x, ctx).add(c, ctx)
        return acc

    @staticmethod
    def _horner_pt(coeffs, x, ctx):
        acc = coeffs[-1]
        for c in reversed(coeffs[:-1]):
            acc = acc.mul(x, ctx).add(c, ctx)
        return acc

    def eval_box(self, xs, ctx):
        return (self._horner_iv(self.coeffs, xs[0], ctx),)

    def jac_box(self, xs, ctx):
        return ((self._horner_iv(self.dcoeffs, xs[0], ctx),),)

    def eval_mid(self, xs, ctx):
        return (self._horner_pt(self.mids, xs[0], ctx),)

    def jac_mid(self, xs, ctx):
        return ((self._horner_pt(self.dmids, xs[0], ctx),),)


class EmbeddingBox:
    """Certified interval enclosure of one root of the defining polynomial."""

    __slots__ = ("field", "alpha", "proof", "prec")

    def __init__(self, field: NumberField, alpha: ComplexInterval, proof: MooreBox, prec: int):
        self.field = field
        self.alpha = alpha
        self.proof = proof
        self.prec = prec

    def __repr__(self) -> str:
        return f"EmbeddingBox(prec={self.prec}, alpha={self.alpha})"


def _alpha_from_box(m: MooreBox, ctx: Ctx) -> ComplexInterval:
    s = ctx.up.mul(m.r, ctx.to_up(m.rho))
    c = m.x[0]
    return ComplexInterval(
        RealInterval(ctx.dn.sub(c.re, s), ctx.up.add(c.re, s)),
        RealInterval(ctx.dn.sub(c.im, s), ctx.up.add(c.im, s)),
    )


def embed_root(
    field: NumberField,
    approx: tuple,
    ctx: Ctx,
    target_width=None,
    max_prec: int = 8192,
) -> EmbeddingBox:
    """Certify the root of the defining polynomial near an approximation.

    approx is an exact (re, im) rational pair.  The returned interval
    has width at most target_width (default 2^(-prec/2)); precision is
    doubled internally as needed, up to max_prec.
    """
    if target_width is None:
        target_width = mpq(1, 1 << max(ctx.prec // 2, 8))
    target_width = mpq(target_width)
    if target_width <= 0:
        raise ValueError("target width must be positive")
    re_q, im_q = mpq(approx[0]), mpq(approx[1])

    if field.degree == 1:
        # the root is the exact rational -c0; no search needed
        root = -field.min_poly[0]
        prec = ctx.prec
        while prec <= max_prec:
            c = Ctx(prec)
            alpha = ComplexInterval.from_rationals(root, 0, c)
            if alpha.width_up(c) <= target_width:
                system = _MinPolySystem(field.min_poly, c)
                m = certify_approx(system, (CPoint(c.to_ne(root), mpfr(0)),), c)
                return EmbeddingBox(field, alpha, m, c.prec)
            prec *= 2
        raise IsolationFailed(
            f"rational root {root} not representable within {target_width}"
            f" below {max_prec} bits"
        )

    prec = ctx.prec
    while prec <= max_prec:
        c = Ctx(prec)
        box = _try_embed(field, re_q, im_q, target_width, c)
        if box is not None:
            return box
        prec *= 2
    raise IsolationFailed(
        f"no certified root of width {target_width} near "
        f"({re_q}, {im_q}) below {max_prec} bits"
    )


def _try_embed(field: NumberField, re_q, im_q, target_width, c: Ctx):
    system = _MinPolySystem(field.min_poly, c)
    x = CPoint.from_rationals(re_q, im_q, c)
    eps = c.to_ne(mpq(1, 1 << max(c.prec - 4, 4)))
    for _ in range(80):
        fx = system.eval_mid((x,), c)[0]
        dfx = system.jac_mid((x,), c)[0][0]
        try:
            step = fx.div(dfx, c)
        except ZeroDivisionError:
            return None
        x = x.sub(step, c)
        if not x.is_finite():
            return None
        scale = c.ne.add(mpfr(1), x.norm_inf(c))
        if step.norm_inf(c) <= c.ne.mul(eps, scale):
            break
    try:
        m = certify_approx(system, (x,), c)
    except CertifyFailed:
        return None
    # shrink the certified radius until the interval is narrow enough
    r_goal = c.dn.mul(c.to_dn(target_width), c.to_dn(mpq(5, 4)))
    if m.r > r_goal:
        if moore_check(system, m.x, r_goal, m.A, RHO_EQUAL, c):
            m = MooreBox(m.x, r_goal, m.A, RHO_EQUAL)
        else:
            return None
    alpha = _alpha_from_box(m, c)
    if not alpha.ok or alpha.width_up(c) > target_width:
        return None
    return EmbeddingBox(field, alpha, m, c.prec)


def nf_to_interval(a: NFElement, emb: EmbeddingBox, ctx: Ctx) -> ComplexInterval:
    """Interval enclosure of the embedded value of a field element."""
    if a.field != emb.field:
        raise ValueError("element and embedding belong to different fields")
    if a.is_rational():
        return ComplexInterval.from_rationals(a.coeffs[0], 0, ctx)
    acc = ComplexInterval.from_rationals(a.coeffs[-1], 0, ctx)
    for q in reversed(a.coeffs[:-1]):
        acc = acc.mul(emb.alpha, ctx).add(
            ComplexInterval.from_rationals(q, 0, ctx), ctx
        )
    return acc
