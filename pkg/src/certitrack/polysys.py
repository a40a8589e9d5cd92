"""Sparse multivariate polynomials and square polynomial systems.

An MPoly maps exponent tuples to coefficients.  Coefficients live in
one of three domains: exact rationals (mpq), number field elements, or
complex intervals.  Exact polynomials support exact ring operations;
interval polynomials take a Ctx and round outward.  Number field
coefficients must pass through substitute_nu before any evaluation.

Evaluation uses a recursive Horner tree compiled once per polynomial,
shared by the interval and midpoint evaluators.

Variable 0 of a ParametricSystem is the tracking parameter; the
remaining variables are the unknowns.  Specialization at an interval
parameter value and affine reparametrization of segments both preserve
enclosures.
"""

from __future__ import annotations

from typing import Callable, Sequence

from gmpy2 import mpfr, mpq

from .interval import Box, ComplexInterval, CPoint, PointVec, RealInterval
from .numberfield import EmbeddingBox, NFElement, nf_to_interval
from .prec import Ctx

Coeff = object  # mpq | NFElement | ComplexInterval


def _is_interval(c) -> bool:
    return isinstance(c, ComplexInterval)


def _coeff_is_zero(c) -> bool:
    if isinstance(c, ComplexInterval):
        return c.is_point() and c.re.lo == 0 and c.im.lo == 0
    if isinstance(c, NFElement):
        return c.is_zero()
    return c == 0


def _promote_pair(a, b, ctx: Ctx | None):
    if isinstance(a, ComplexInterval) or isinstance(b, ComplexInterval):
        if ctx is None:
            raise ValueError("interval coefficients need a Ctx")
        return _to_interval_coeff(a, ctx), _to_interval_coeff(b, ctx), "iv"
    if isinstance(a, NFElement) or isinstance(b, NFElement):
        if not isinstance(a, NFElement):
            a = NFElement.from_rational(b.field, mpq(a))
        if not isinstance(b, NFElement):
            b = NFElement.from_rational(a.field, mpq(b))
        return a, b, "nf"
    return mpq(a), mpq(b), "q"


def _to_interval_coeff(c, ctx: Ctx) -> ComplexInterval:
    if isinstance(c, ComplexInterval):
        return c
    if isinstance(c, NFElement):
        raise TypeError("number field coefficient: substitute the embedding first")
    return ComplexInterval.from_rationals(mpq(c), 0, ctx)


def _coeff_add(a, b, ctx):
    a, b, kind = _promote_pair(a, b, ctx)
    if kind == "iv":
        return a.add(b, ctx)
    return a + b


def _coeff_mul(a, b, ctx):
    a, b, kind = _promote_pair(a, b, ctx)
    if kind == "iv":
        return a.mul(b, ctx)
    return a * b


def _coeff_neg(a, ctx):
    if isinstance(a, ComplexInterval):
        if ctx is None:
            raise ValueError("interval coefficients need a Ctx")
        return a.neg(ctx)
    return -a


def _coeff_scale_int(a, k: int, ctx):
    if isinstance(a, ComplexInterval):
        if ctx is None:
            raise ValueError("interval coefficients need a Ctx")
        return a.scale_int(k, ctx)
    if isinstance(a, NFElement):
        return a * NFElement.from_rational(a.field, mpq(k))
    return a * k


class MPoly:
    """Sparse polynomial: dict from exponent tuples to coefficients."""

    __slots__ = ("nvars", "terms", "_horner")

    def __init__(self, nvars: int, terms: dict):
        self.nvars = nvars
        clean = {}
        for exps, c in terms.items():
            if len(exps) != nvars:
                raise ValueError(f"exponent tuple {exps} does not have {nvars} entries")
            if any(e < 0 for e in exps):
                raise ValueError(f"negative exponent in {exps}")
            if not _coeff_is_zero(c):
                clean[tuple(int(e) for e in exps)] = c
        self.terms = clean
        self._horner = None

    # ---------------------------------------------------------- constructors

    @classmethod
    def zero(cls, nvars: int) -> "MPoly":
        return cls(nvars, {})

    @classmethod
    def const(cls, nvars: int, c) -> "MPoly":
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def var(cls, nvars: int, index: int, coeff=mpq(1)) -> "MPoly":
        exps = [0] * nvars
        exps[index] = 1
        return cls(nvars, {tuple(exps): coeff})

    # ------------------------------------------------------------------ ring

    def add(self, o: "MPoly", ctx: Ctx | None = None) -> "MPoly":
        if self.nvars != o.nvars:
            raise ValueError("mixed variable counts")
        out = dict(self.terms)
        for e, c in o.terms.items():
            if e in out:
                out[e] = _coeff_add(out[e], c, ctx)
            else:
                out[e] = c
        return MPoly(self.nvars, out)

    def sub(self, o: "MPoly", ctx: Ctx | None = None) -> "MPoly":
        return self.add(o.neg(ctx), ctx)

    def neg(self, ctx: Ctx | None = None) -> "MPoly":
        return MPoly(self.nvars, {e: _coeff_neg(c, ctx) for e, c in self.terms.items()})

    def mul(self, o: "MPoly", ctx: Ctx | None = None) -> "MPoly":
        if self.nvars != o.nvars:
            raise ValueError("mixed variable counts")
        out: dict = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in o.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                p = _coeff_mul(c1, c2, ctx)
                if e in out:
                    out[e] = _coeff_add(out[e], p, ctx)
                else:
                    out[e] = p
        return MPoly(self.nvars, out)

    def scale(self, c, ctx: Ctx | None = None) -> "MPoly":
        return MPoly(
            self.nvars, {e: _coeff_mul(cc, c, ctx) for e, cc in self.terms.items()}
        )

    def deriv(self, var: int, ctx: Ctx | None = None) -> "MPoly":
        out = {}
        for e, c in self.terms.items():
            k = e[var]
            if k == 0:
                continue
            e2 = list(e)
            e2[var] = k - 1
            key = tuple(e2)
            val = _coeff_scale_int(c, k, ctx)
            if key in out:
                out[key] = _coeff_add(out[key], val, ctx)
            else:
                out[key] = val
        return MPoly(self.nvars, out)

    def map_coeffs(self, fn: Callable) -> "MPoly":
        return MPoly(self.nvars, {e: fn(c) for e, c in self.terms.items()})

    def promote(self, ctx: Ctx) -> "MPoly":
        """Convert exact coefficients to width-tight complex intervals."""
        return self.map_coeffs(lambda c: _to_interval_coeff(c, ctx))

    # ----------------------------------------------------------- structure

    def is_zero(self) -> bool:
        return not self.terms

    def deg_in(self, var: int) -> int:
        if not self.terms:
            return -1
        return max(e[var] for e in self.terms)

    def total_degree(self, skip_var: int | None = None) -> int:
        if not self.terms:
            return -1
        best = 0
        for e in self.terms:
            s = sum(x for i, x in enumerate(e) if i != skip_var)
            best = max(best, s)
        return best

    def uses_var(self, var: int) -> bool:
        return any(e[var] > 0 for e in self.terms)

    def drop_var(self, var: int) -> "MPoly":
        """Remove an unused variable slot."""
        if self.uses_var(var):
            raise ValueError(f"variable {var} occurs in the polynomial")
        out = {}
        for e, c in self.terms.items():
            out[e[:var] + e[var + 1 :]] = c
        return MPoly(self.nvars - 1, out)

    def lift_var(self, position: int) -> "MPoly":
        """Insert a fresh unused variable slot at the given position."""
        out = {}
        for e, c in self.terms.items():
            out[e[:position] + (0,) + e[position:]] = c
        return MPoly(self.nvars + 1, out)

    # ----------------------------------------------------------- evaluation

    def _tree(self):
        if self._horner is None:
            self._horner = _build_horner(self.terms, self.nvars)
        return self._horner

    def eval_box(self, xs: Sequence[ComplexInterval], ctx: Ctx) -> ComplexInterval:
        """Interval enclosure of the polynomial over the box xs."""
        if len(xs) != self.nvars:
            raise ValueError("wrong number of coordinates")
        return _eval_iv(self._tree(), xs, ctx)

    def eval_mid(self, xs: Sequence[CPoint], ctx: Ctx) -> CPoint:
        """Approximate value at an exact point, round-to-nearest."""
        if len(xs) != self.nvars:
            raise ValueError("wrong number of coordinates")
        return _eval_pt(self._tree(), xs, ctx)

    def specialize_var0(self, t: ComplexInterval, ctx: Ctx) -> "MPoly":
        """Substitute an interval value for variable 0 and drop the slot."""
        maxk = self.deg_in(0)
        powers = [ComplexInterval.one()]
        for _ in range(max(maxk, 0)):
            powers.append(powers[-1].mul(t, ctx))
        out: dict = {}
        for e, c in self.terms.items():
            key = e[1:]
            val = _to_interval_coeff(c, ctx).mul(powers[e[0]], ctx)
            if key in out:
                out[key] = out[key].add(val, ctx)
            else:
                out[key] = val
        return MPoly(self.nvars - 1, out)

    def subs_var0_affine(self, a: CPoint, b: CPoint, ctx: Ctx) -> "MPoly":
        """Reparametrize variable 0 by t = a + (b - a) s.

        The difference b - a is enclosed outward, so the result encloses
        the exact reparametrized polynomial.
        """
        span = ComplexInterval(
            RealInterval(ctx.dn.sub(b.re, a.re), ctx.up.sub(b.re, a.re)),
            RealInterval(ctx.dn.sub(b.im, a.im), ctx.up.sub(b.im, a.im)),
        )
        ell = MPoly(
            self.nvars,
            {
                (1,) + (0,) * (self.nvars - 1): span,
                (0,) * self.nvars: a.to_interval(),
            },
        )
        maxk = self.deg_in(0)
        if maxk <= 0:
            return self.promote(ctx)
        layers: list[dict] = [{} for _ in range(maxk + 1)]
        for e, c in self.terms.items():
            layers[e[0]][(0,) + e[1:]] = _to_interval_coeff(c, ctx)
        acc = MPoly(self.nvars, layers[maxk])
        for k in range(maxk - 1, -1, -1):
            acc = acc.mul(ell, ctx).add(MPoly(self.nvars, layers[k]), ctx)
        return acc

    def __eq__(self, o) -> bool:
        if not isinstance(o, MPoly):
            return NotImplemented
        return self.nvars == o.nvars and self.terms == o.terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms)))

    def __repr__(self) -> str:
        if not self.terms:
            return "MPoly(0)"
        bits = []
        for e in sorted(self.terms, reverse=True):
            mono = "*".join(f"x{i}^{k}" for i, k in enumerate(e) if k)
            c = self.terms[e]
            bits.append(f"({c})" + (f"*{mono}" if mono else ""))
        return " + ".join(bits)


def substitute_nu(p: MPoly, emb: EmbeddingBox, ctx: Ctx) -> MPoly:
    """Replace number field coefficients by interval enclosures."""

    def conv(c):
        if isinstance(c, NFElement):
            return nf_to_interval(c, emb, ctx)
        return _to_interval_coeff(c, ctx)

    return p.map_coeffs(conv)


# ------------------------------------------------------------- Horner tree

_CONST = 0
_VAR = 1


def _build_horner(terms: dict, nvars: int):
    if not terms:
        return (_CONST, mpq(0))
    if len(terms) == 1:
        (e, c), = terms.items()
        if not any(e):
            return (_CONST, c)
    var = None
    for v in range(nvars):
        if any(e[v] for e in terms):
            var = v
            break
    if var is None:
        # all exponents zero but several terms cannot happen (dict keys)
        (e, c), = terms.items()
        return (_CONST, c)
    groups: dict[int, dict] = {}
    for e, c in terms.items():
        k = e[var]
        e2 = list(e)
        e2[var] = 0
        groups.setdefault(k, {})[tuple(e2)] = c
    maxk = max(groups)
    children = []
    for k in range(maxk + 1):
        if k in groups:
            children.append(_build_horner(groups[k], nvars))
        else:
            children.append(None)
    return (_VAR, var, tuple(children))


def _eval_iv(node, xs, ctx: Ctx) -> ComplexInterval:
    if node[0] == _CONST:
        return _to_interval_coeff(node[1], ctx)
    _, var, children = node
    x = xs[var]
    acc = None
    for child in reversed(children):
        if acc is not None:
            acc = acc.mul(x, ctx)
        if child is not None:
            v = _eval_iv(child, xs, ctx)
            acc = v if acc is None else acc.add(v, ctx)
    return acc


def _coeff_to_point(c, ctx: Ctx) -> CPoint:
    if isinstance(c, ComplexInterval):
        return c.mid(ctx)
    if isinstance(c, NFElement):
        raise TypeError("number field coefficient: substitute the embedding first")
    q = mpq(c)
    return CPoint(ctx.to_ne(q), ctx.to_ne(0))


def _eval_pt(node, xs, ctx: Ctx) -> CPoint:
    if node[0] == _CONST:
        return _coeff_to_point(node[1], ctx)
    _, var, children = node
    x = xs[var]
    acc = None
    for child in reversed(children):
        if acc is not None:
            acc = acc.mul(x, ctx)
        if child is not None:
            v = _eval_pt(child, xs, ctx)
            acc = v if acc is None else acc.add(v, ctx)
    return acc


# ---------------------------------------------------------------- systems


class SquareSystem:
    """n polynomials in n variables with cached Jacobian."""

    def __init__(self, polys: Sequence[MPoly], jac: Sequence[Sequence[MPoly]] | None = None):
        polys = tuple(polys)
        if not polys:
            raise ValueError("empty system")
        n = len(polys)
        for p in polys:
            if p.nvars != n:
                raise ValueError(
                    f"system is not square: {n} polynomials, {p.nvars} variables"
                )
        self.polys = polys
        self.n = n
        self._jac = tuple(tuple(row) for row in jac) if jac is not None else None

    def jac_polys(self, ctx: Ctx | None = None):
        if self._jac is None:
            self._jac = tuple(
                tuple(p.deriv(j, ctx) for j in range(self.n)) for p in self.polys
            )
        return self._jac

    def eval_box(self, xs: Box, ctx: Ctx) -> Box:
        return tuple(p.eval_box(xs, ctx) for p in self.polys)

    def jac_box(self, xs: Box, ctx: Ctx):
        return tuple(
            tuple(entry.eval_box(xs, ctx) for entry in row)
            for row in self.jac_polys(ctx)
        )

    def eval_mid(self, xs: PointVec, ctx: Ctx) -> PointVec:
        return tuple(p.eval_mid(xs, ctx) for p in self.polys)

    def jac_mid(self, xs: PointVec, ctx: Ctx):
        return tuple(
            tuple(entry.eval_mid(xs, ctx) for entry in row)
            for row in self.jac_polys(ctx)
        )


class ParametricSystem:
    """n polynomials in n + 1 variables; variable 0 is the parameter."""

    def __init__(self, polys: Sequence[MPoly], ctx: Ctx | None = None,
                 jac: Sequence[Sequence[MPoly]] | None = None):
        polys = tuple(polys)
        if not polys:
            raise ValueError("empty system")
        n = len(polys)
        for p in polys:
            if p.nvars != n + 1:
                raise ValueError(
                    f"parametric system needs {n + 1} variables, got {p.nvars}"
                )
        self.polys = polys
        self.n = n
        if jac is not None:
            self.jac = tuple(tuple(row) for row in jac)
        else:
            self.jac = tuple(
                tuple(p.deriv(j + 1, ctx) for j in range(n)) for p in polys
            )

    def specialize(self, t: ComplexInterval, ctx: Ctx) -> SquareSystem:
        polys = [p.specialize_var0(t, ctx) for p in self.polys]
        jac = [
            [entry.specialize_var0(t, ctx) for entry in row] for row in self.jac
        ]
        return SquareSystem(polys, jac)

    def view(self, t: ComplexInterval, ctx: Ctx) -> "TView":
        return TView(self, t, ctx)

    def compose_segment(self, a: CPoint, b: CPoint, ctx: Ctx) -> "ParametricSystem":
        return compose_segment(self, a, b, ctx)


class TView:
    """A parametric system pinned at an interval parameter value.

    Implements the same evaluation protocol as SquareSystem without
    rebuilding specialized polynomials, which keeps the per-step cost
    of tracking low.
    """

    __slots__ = ("sys", "t", "t_mid", "n")

    def __init__(self, sys: ParametricSystem, t: ComplexInterval, ctx: Ctx):
        self.sys = sys
        self.t = t
        self.t_mid = t.mid(ctx)
        self.n = sys.n

    def eval_box(self, xs: Box, ctx: Ctx) -> Box:
        full = (self.t,) + tuple(xs)
        return tuple(p.eval_box(full, ctx) for p in self.sys.polys)

    def jac_box(self, xs: Box, ctx: Ctx):
        full = (self.t,) + tuple(xs)
        return tuple(
            tuple(entry.eval_box(full, ctx) for entry in row) for row in self.sys.jac
        )

    def eval_mid(self, xs: PointVec, ctx: Ctx) -> PointVec:
        full = (self.t_mid,) + tuple(xs)
        return tuple(p.eval_mid(full, ctx) for p in self.sys.polys)

    def jac_mid(self, xs: PointVec, ctx: Ctx):
        full = (self.t_mid,) + tuple(xs)
        return tuple(
            tuple(entry.eval_mid(full, ctx) for entry in row) for row in self.sys.jac
        )


def jacobian(system) -> tuple:
    """Grid of partial derivatives with respect to the unknowns."""
    if isinstance(system, SquareSystem):
        return system.jac_polys()
    if isinstance(system, ParametricSystem):
        return system.jac
    raise TypeError(f"not a polynomial system: {type(system).__name__}")


def compose_segment(f: ParametricSystem, a: CPoint, b: CPoint, ctx: Ctx) -> ParametricSystem:
    """Restrict the parameter to the segment from a to b.

    The new parameter runs over [0, 1] with 0 at a and 1 at b.
    """
    if a == b:
        raise ValueError("degenerate segment: endpoints coincide")
    polys = [p.subs_var0_affine(a, b, ctx) for p in f.polys]
    jac = [[entry.subs_var0_affine(a, b, ctx) for entry in row] for row in f.jac]
    return ParametricSystem(polys, ctx, jac)
