"""Sparse polynomial evaluation and parametric system plumbing."""

import random

import pytest
from gmpy2 import mpfr, mpq

from certitrack.interval import CPoint, ComplexInterval
from certitrack.numberfield import NumberField, embed_root
from certitrack.polysys import (
    MPoly,
    ParametricSystem,
    SquareSystem,
    compose_segment,
    substitute_nu,
)
from certitrack.prec import Ctx

CTX = Ctx(53)


def rational_eval(terms, xs):
    """Oracle: evaluate {exps: mpq coeff} at exact rational points."""
    out = mpq(0)
    for exps, c in terms.items():
        term = mpq(c)
        for x, e in zip(xs, exps):
            term *= x ** e
        out += term
    return out


class TestMPolyBasics:
    def test_zero_coefficients_dropped(self):
        p = MPoly(2, {(1, 0): mpq(0), (0, 1): mpq(3)})
        assert (1, 0) not in p.terms
        assert p.terms == {(0, 1): mpq(3)}

    def test_bad_exponent_tuples(self):
        with pytest.raises(ValueError):
            MPoly(2, {(1,): mpq(1)})
        with pytest.raises(ValueError):
            MPoly(1, {(-1,): mpq(1)})

    def test_ring_ops_match_oracle(self):
        rng = random.Random(3)
        for _ in range(40):
            n = rng.randint(1, 3)
            def rand_poly():
                return {
                    tuple(rng.randint(0, 3) for _ in range(n)): mpq(
                        rng.randint(-9, 9), rng.randint(1, 9)
                    )
                    for _ in range(rng.randint(0, 4))
                }
            ta, tb = rand_poly(), rand_poly()
            a, b = MPoly(n, ta), MPoly(n, tb)
            xs = [mpq(rng.randint(-5, 5), rng.randint(1, 5)) for _ in range(n)]
            pts = tuple(CPoint.from_rationals(x, 0, CTX) for x in xs)
            for op, oracle in (
                (a.add(b), rational_eval(ta, xs) + rational_eval(tb, xs)),
                (a.mul(b), rational_eval(ta, xs) * rational_eval(tb, xs)),
                (a.sub(b), rational_eval(ta, xs) - rational_eval(tb, xs)),
            ):
                got = op.eval_box(tuple(ComplexInterval.point(p) for p in pts), CTX)
                assert got.re.contains(oracle), (op.terms, xs)
                assert got.im.contains(0)

    def test_deriv(self):
        # d/dx (x^3 y + 2 x) = 3 x^2 y + 2
        p = MPoly(2, {(3, 1): mpq(1), (1, 0): mpq(2)})
        d = p.deriv(0)
        assert d.terms == {(2, 1): mpq(3), (0, 0): mpq(2)}

    def test_total_degree(self):
        p = MPoly(2, {(3, 1): mpq(1), (1, 0): mpq(2)})
        assert p.total_degree() == 4
        assert p.total_degree(skip_var=0) == 1
        assert p.deg_in(0) == 3
        assert p.uses_var(1)
        assert not MPoly(2, {(1, 0): mpq(1)}).uses_var(1)


class TestEvaluation:
    def test_horner_matches_oracle_on_boxes(self):
        rng = random.Random(17)
        for _ in range(60):
            n = rng.randint(1, 3)
            terms = {
                tuple(rng.randint(0, 4) for _ in range(n)): mpq(
                    rng.randint(-20, 20), rng.randint(1, 10)
                )
                for _ in range(rng.randint(1, 6))
            }
            p = MPoly(n, terms)
            res = [mpq(rng.randint(-8, 8), rng.randint(1, 6)) for _ in range(n)]
            ims = [mpq(rng.randint(-8, 8), rng.randint(1, 6)) for _ in range(n)]
            box = tuple(
                ComplexInterval.from_rationals(re, im, CTX)
                for re, im in zip(res, ims)
            )
            got = p.eval_box(box, CTX)
            # complex rational oracle
            want_re, want_im = mpq(0), mpq(0)
            for exps, c in terms.items():
                tre, tim = mpq(c), mpq(0)
                for re, im, e in zip(res, ims, exps):
                    for _ in range(e):
                        tre, tim = tre * re - tim * im, tre * im + tim * re
                want_re += tre
                want_im += tim
            assert got.re.contains(want_re)
            assert got.im.contains(want_im)

    def test_eval_mid_exact_on_small_rationals(self):
        p = MPoly(1, {(2,): mpq(1), (0,): mpq(-2)})
        x = (CPoint.from_rationals(mpq(3, 2), 0, CTX),)
        got = p.eval_mid(x, CTX)
        assert float(got.re) == 0.25


class TestParametric:
    def setup_method(self):
        # f(t, x) = x^2 - t
        self.f = ParametricSystem([MPoly(2, {(0, 2): mpq(1), (1, 0): mpq(-1)})])

    def test_specialize(self):
        s = self.f.specialize(ComplexInterval.from_rationals(mpq(1, 4), 0, CTX), CTX)
        assert isinstance(s, SquareSystem)
        x = (ComplexInterval.from_rationals(mpq(1, 2), 0, CTX),)
        v = s.eval_box(x, CTX)[0]
        assert v.re.contains(0)

    def test_view_matches_specialize(self):
        t = ComplexInterval.from_rationals(mpq(1, 3), mpq(1, 7), CTX)
        xs = (ComplexInterval.from_rationals(mpq(2, 5), mpq(-1, 9), CTX),)
        view = self.f.view(t, CTX)
        spec = self.f.specialize(t, CTX)
        a = view.eval_box(xs, CTX)[0]
        b = spec.eval_box(xs, CTX)[0]
        assert a.re.intersects(b.re) and a.im.intersects(b.im)
        ja = view.jac_box(xs, CTX)[0][0]
        jb = spec.jac_box(xs, CTX)[0][0]
        assert ja.re.intersects(jb.re) and ja.im.intersects(jb.im)

    def test_compose_segment_endpoints(self):
        a = CPoint.from_rationals(mpq(1, 2), 0, CTX)
        b = CPoint.from_rationals(0, mpq(1, 2), CTX)
        g = compose_segment(self.f, a, b, CTX)
        # at s=0 the parameter is a; at s=1 it is b
        s0 = g.specialize(ComplexInterval.point(CPoint.from_rationals(0, 0, CTX)), CTX)
        s1 = g.specialize(ComplexInterval.point(CPoint.from_rationals(1, 0, CTX)), CTX)
        x = (ComplexInterval.from_rationals(mpq(7, 10), mpq(1, 10), CTX),)
        direct0 = self.f.specialize(ComplexInterval.point(a), CTX).eval_box(x, CTX)[0]
        direct1 = self.f.specialize(ComplexInterval.point(b), CTX).eval_box(x, CTX)[0]
        got0 = s0.eval_box(x, CTX)[0]
        got1 = s1.eval_box(x, CTX)[0]
        assert got0.re.intersects(direct0.re) and got0.im.intersects(direct0.im)
        assert got1.re.intersects(direct1.re) and got1.im.intersects(direct1.im)

    def test_compose_degenerate_rejected(self):
        a = CPoint.from_rationals(mpq(1, 2), 0, CTX)
        with pytest.raises(ValueError):
            compose_segment(self.f, a, a, CTX)

    def test_nonsquare_rejected(self):
        with pytest.raises(ValueError):
            ParametricSystem([MPoly(3, {(0, 1, 1): mpq(1)})])
        with pytest.raises(ValueError):
            SquareSystem([MPoly(2, {(1, 0): mpq(1)})])


class TestNumberFieldCoefficients:
    def test_substitute_nu_then_evaluate(self):
        field = NumberField([-2, 0, 1])
        emb = embed_root(field, (mpq(1414, 1000), 0), CTX)
        # p = v x - 2: zero at x = 2/v = v
        p = MPoly(1, {(1,): field.gen(), (0,): field.element([-2])})
        p_iv = substitute_nu(p, emb, CTX)
        x = ComplexInterval.from_rationals(mpq(1414214, 10**6), 0, CTX)
        v = p_iv.eval_box((x,), CTX)
        assert abs(float(v.re.lo)) < 1e-4 and abs(float(v.re.hi)) < 1e-4

    def test_nf_coefficient_requires_substitution(self):
        field = NumberField([-2, 0, 1])
        p = MPoly(1, {(1,): field.gen()})
        x = (ComplexInterval.from_rationals(1, 0, CTX),)
        with pytest.raises(TypeError):
            p.eval_box(x, CTX)

    def test_mixed_rational_and_nf(self):
        field = NumberField([-2, 0, 1])
        p = MPoly(1, {(1,): field.gen()})
        q = MPoly(1, {(0,): mpq(5)})
        s = p.add(q)
        assert s.terms[(0,)] == field.element([5])


class TestSubsAffine:
    def test_affine_reparametrization_encloses(self):
        # f(t, x) = x - t; t = (1-s) a + s b
        f = MPoly(2, {(0, 1): mpq(1), (1, 0): mpq(-1)})
        a = CPoint.from_rationals(mpq(1, 4), 0, CTX)
        b = CPoint.from_rationals(mpq(3, 4), mpq(1, 2), CTX)
        g = f.subs_var0_affine(a, b, CTX)
        assert g.nvars == 2
        # at s = 1/2, t = 1/2 + i/4, so g(1/2, x) should vanish at x = t
        s = ComplexInterval.from_rationals(mpq(1, 2), 0, CTX)
        x = ComplexInterval.from_rationals(mpq(1, 2), mpq(1, 4), CTX)
        v = g.eval_box((s, x), CTX)
        assert v.re.contains(0) and v.im.contains(0)
