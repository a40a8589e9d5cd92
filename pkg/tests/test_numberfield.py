"""Number field arithmetic, resultants, and certified embeddings."""

import pytest
from gmpy2 import mpq

from certitrack.errors import InverseOfZero, IsolationFailed, NotInvertible
from certitrack.numberfield import (
    EmbeddingBox,
    NumberField,
    embed_root,
    nf_arith,
    nf_to_interval,
    resultant,
)
from certitrack.prec import Ctx

CTX = Ctx(53)

SQRT2 = NumberField([-2, 0, 1])       # v^2 - 2
GAUSS = NumberField([1, 0, 1])        # v^2 + 1
LINEAR = NumberField([-3, 1])         # v - 3


class TestFieldArithmetic:
    def test_generator_squares_to_two(self):
        v = SQRT2.gen()
        assert v * v == SQRT2.element([2])

    def test_inverse_of_generator(self):
        v = SQRT2.gen()
        assert v.inv() == SQRT2.element([0, mpq(1, 2)])
        assert v * v.inv() == SQRT2.one()

    def test_additive_inverse(self):
        v = SQRT2.gen()
        assert (v + (-v)).is_zero()

    def test_division(self):
        v = SQRT2.gen()
        a = SQRT2.element([1, 1])       # 1 + v
        assert (a / a) == SQRT2.one()
        assert a * a == SQRT2.element([3, 2])   # (1+v)^2 = 3 + 2v

    def test_pow(self):
        v = SQRT2.gen()
        assert v ** 4 == SQRT2.element([4])
        assert v ** 0 == SQRT2.one()
        assert v ** 1 == v

    def test_inverse_of_zero(self):
        with pytest.raises(InverseOfZero):
            SQRT2.zero().inv()
        with pytest.raises(InverseOfZero):
            SQRT2.one() / SQRT2.zero()

    def test_reducible_modulus_detected_lazily(self):
        # v^2 - 1 is squarefree but reducible; inverting v - 1 hits the factor
        field = NumberField([-1, 0, 1])
        bad = field.element([-1, 1])
        with pytest.raises(NotInvertible):
            bad.inv()

    def test_non_squarefree_modulus_rejected(self):
        with pytest.raises(ValueError):
            NumberField([0, 0, 1])      # v^2

    def test_cross_field_mixing_rejected(self):
        with pytest.raises(ValueError):
            SQRT2.gen() + GAUSS.gen()

    def test_dispatch(self):
        v = SQRT2.gen()
        assert nf_arith("add", v, v) == v + v
        assert nf_arith("mul", v, v) == v * v
        assert nf_arith("sub", v, v).is_zero()
        assert nf_arith("div", v, v) == SQRT2.one()
        with pytest.raises(ValueError):
            nf_arith("pow", v, v)

    def test_rationality(self):
        assert SQRT2.element([7]).is_rational()
        assert not SQRT2.gen().is_rational()


class TestResultant:
    def test_coprime_constant(self):
        # res(x^2, 1) with respect to x: nonzero constant
        x2 = [SQRT2.zero(), SQRT2.zero(), SQRT2.one()]
        one = [SQRT2.one()]
        assert resultant(x2, one) == SQRT2.one()

    def test_common_root_gives_zero(self):
        x2m1 = [SQRT2.element([-1]), SQRT2.zero(), SQRT2.one()]
        xm1 = [SQRT2.element([-1]), SQRT2.one()]
        assert resultant(x2m1, xm1).is_zero()

    def test_generator_coefficients(self):
        # res(x^2 - v, x - 1) = 1 - v
        p = [-SQRT2.gen(), SQRT2.zero(), SQRT2.one()]
        q = [SQRT2.element([-1]), SQRT2.one()]
        assert resultant(p, q) == SQRT2.element([1, -1])

    def test_matches_product_formula(self):
        # res(x^2 - 2, x^2 - 3) over the rationals inside Q(v):
        # roots +-sqrt2, +-sqrt3, product of differences squared-ish = 1
        p = [SQRT2.element([-2]), SQRT2.zero(), SQRT2.one()]
        q = [SQRT2.element([-3]), SQRT2.zero(), SQRT2.one()]
        assert resultant(p, q) == SQRT2.one()

    def test_swap_sign_rule(self):
        # res(q, p) = (-1)^(deg p * deg q) res(p, q)
        p = [-SQRT2.gen(), SQRT2.zero(), SQRT2.one()]
        q = [SQRT2.element([-1]), SQRT2.one()]
        assert resultant(q, p) == resultant(p, q)


class TestEmbedRoot:
    def test_sqrt2_tight(self):
        emb = embed_root(SQRT2, (mpq(1414, 1000), 0), CTX, target_width=mpq(1, 1 << 40))
        assert emb.alpha.width_up(CTX) <= mpq(1, 1 << 40)
        s = 2 ** 0.5
        assert float(emb.alpha.re.lo) <= s <= float(emb.alpha.re.hi)
        assert emb.alpha.im.contains(0)

    def test_degree_one_exact(self):
        emb = embed_root(LINEAR, (3, 0), CTX)
        assert float(emb.alpha.re.lo) == 3.0
        assert float(emb.alpha.re.hi) == 3.0
        assert emb.alpha.im.is_point()

    def test_sign_of_imaginary_root(self):
        emb = embed_root(GAUSS, (0, mpq(99, 100)), CTX)
        assert float(emb.alpha.im.lo) > 0.9       # +i, not -i
        emb2 = embed_root(GAUSS, (0, mpq(-99, 100)), CTX)
        assert float(emb2.alpha.im.hi) < -0.9     # -i from below

    def test_hopeless_seed_fails(self):
        # seed at a local max of v^2 - 2 derivative sign flip region, tiny cap
        with pytest.raises(IsolationFailed):
            embed_root(SQRT2, (0, 0), Ctx(8), max_prec=8)

    def test_idempotent_width(self):
        e1 = embed_root(SQRT2, (mpq(3, 2), 0), CTX, target_width=mpq(1, 1 << 30))
        e2 = embed_root(SQRT2, (mpq(3, 2), 0), CTX, target_width=mpq(1, 1 << 30))
        assert e1.alpha.re.lo == e2.alpha.re.lo
        assert e1.alpha.re.hi == e2.alpha.re.hi


class TestNFToInterval:
    def setup_method(self):
        self.emb = embed_root(SQRT2, (mpq(1414, 1000), 0), CTX)

    def test_rational_exact(self):
        iv = nf_to_interval(SQRT2.one(), self.emb, CTX)
        assert iv.re.is_point() and float(iv.re.lo) == 1.0

    def test_generator_is_alpha(self):
        iv = nf_to_interval(SQRT2.gen(), self.emb, CTX)
        s = 2 ** 0.5
        assert float(iv.re.lo) <= s <= float(iv.re.hi)

    def test_exact_reduction_before_evaluation(self):
        # v * v - 2 reduces to the zero element, so the output is exactly 0
        v = SQRT2.gen()
        elem = v * v - SQRT2.element([2])
        iv = nf_to_interval(elem, self.emb, CTX)
        assert iv.re.is_point() and float(iv.re.lo) == 0.0
        assert iv.im.is_point() and float(iv.im.lo) == 0.0

    def test_linear_combination_encloses(self):
        # 1/2 + 3v encloses 0.5 + 3 sqrt2
        elem = SQRT2.element([mpq(1, 2), 3])
        iv = nf_to_interval(elem, self.emb, CTX)
        want = 0.5 + 3 * 2 ** 0.5
        assert float(iv.re.lo) <= want <= float(iv.re.hi)

    def test_wrong_field_rejected(self):
        with pytest.raises(ValueError):
            nf_to_interval(GAUSS.gen(), self.emb, CTX)

    def test_embedding_has_proof(self):
        assert isinstance(self.emb, EmbeddingBox)
        assert self.emb.proof is not None
        assert self.emb.prec >= 53
