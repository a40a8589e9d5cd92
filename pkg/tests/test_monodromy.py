"""Fiber bootstrap and monodromy extraction."""

import threading

import pytest
from gmpy2 import mpq

from certitrack.errors import DegenerateLoop, FiberCountMismatch
from certitrack.group import Permutation
from certitrack.monodromy import (
    Fiber,
    bootstrap_fiber,
    fiber_from_points,
    loop_permutation,
    monodromy_triple,
    product_loop,
    standard_loops,
    univariate_fiber,
    winding_number,
)
from certitrack.polysys import MPoly, ParametricSystem, SquareSystem
from certitrack.prec import Ctx
from certitrack.track import PLPath, TrackConfig

CTX = Ctx(53)
CFG = TrackConfig(prec=53)
BASE = (mpq(1, 2), mpq(0))


def power_map(d):
    """x^d as the parametric equation x^d - t."""
    return ParametricSystem([MPoly(2, {(0, d): mpq(1), (1, 0): mpq(-1)})], CTX)


def poly1(pairs):
    return MPoly(1, {(e,): mpq(c) for e, c in pairs})


# ------------------------------------------------------------------ winding


def square_path(ctx=CTX):
    return PLPath.from_rationals(
        [(2, 2), (-2, 2), (-2, -2), (2, -2), (2, 2)], ctx
    )


def test_winding_inside_and_outside():
    sq = square_path()
    assert winding_number(sq, 0, 0) == 1
    assert winding_number(sq, 1, 0) == 1
    assert winding_number(sq, 5, 0) == 0
    assert winding_number(sq, 0, -3) == 0


def test_winding_reversed_is_negative():
    sq = square_path()
    assert winding_number(PLPath(tuple(reversed(sq.vertices))), 0, 0) == -1


def test_winding_point_on_path_degenerate():
    sq = square_path()
    with pytest.raises(DegenerateLoop):
        winding_number(sq, 2, 0)


def test_winding_open_path_rejected():
    open_path = PLPath.from_rationals([(0, 1), (1, 0), (0, -1)], CTX)
    with pytest.raises(ValueError):
        winding_number(open_path, 0, 0)


# -------------------------------------------------------------------- loops


def test_standard_loop_vertices():
    loop0, loop1 = standard_loops(BASE, mpq(1, 2), CTX)
    v0 = [(mpq(v.re), mpq(v.im)) for v in loop0.vertices]
    assert v0 == [
        (mpq(1, 2), 0),
        (0, mpq(1, 2)),
        (mpq(-1, 2), 0),
        (0, mpq(-1, 2)),
        (mpq(1, 2), 0),
    ]
    v1 = [(mpq(v.re), mpq(v.im)) for v in loop1.vertices]
    assert v1 == [
        (mpq(1, 2), 0),
        (1, mpq(-1, 2)),
        (mpq(3, 2), 0),
        (1, mpq(1, 2)),
        (mpq(1, 2), 0),
    ]


def test_standard_loop_windings():
    loop0, loop1 = standard_loops(BASE, mpq(1, 4), CTX)
    assert winding_number(loop0, 0, 0) == 1
    assert winding_number(loop0, 1, 0) == 0
    assert winding_number(loop1, 0, 0) == 0
    assert winding_number(loop1, 1, 0) == 1


def test_loops_reject_zero_radius():
    with pytest.raises(DegenerateLoop):
        standard_loops(BASE, 0, CTX)


def test_loops_reject_base_on_branch_point():
    with pytest.raises(DegenerateLoop):
        standard_loops((mpq(0), mpq(0)), mpq(1, 2), CTX)
    with pytest.raises(DegenerateLoop):
        standard_loops((mpq(1), mpq(0)), mpq(1, 2), CTX)


def test_product_loop_windings():
    loop = product_loop(BASE, CTX)
    assert winding_number(loop, 0, 0) == 1
    assert winding_number(loop, 1, 0) == 1
    loop_hi = product_loop((mpq(1, 2), mpq(1, 4)), CTX)
    assert winding_number(loop_hi, 0, 0) == 1


# ------------------------------------------------------------------- fibers


def test_univariate_fiber_sqrt_half():
    fib = univariate_fiber(poly1([(2, 1), (0, mpq(-1, 2))]), 2, CTX)
    assert fib.degree == 2
    lo, hi = fib.boxes
    # canonical order: centers sorted by (re, im)
    assert float(lo.x[0].re) == pytest.approx(-0.7071067811865476, abs=1e-12)
    assert float(hi.x[0].re) == pytest.approx(0.7071067811865476, abs=1e-12)


def test_univariate_fiber_cube_roots():
    fib = univariate_fiber(poly1([(3, 1), (0, -1)]), 3, CTX)
    centers = [(float(m.x[0].re), float(m.x[0].im)) for m in fib.boxes]
    assert centers[0][0] == pytest.approx(-0.5, abs=1e-12)
    assert centers[0][1] == pytest.approx(-0.8660254037844386, abs=1e-12)
    assert centers[1][1] == pytest.approx(0.8660254037844386, abs=1e-12)
    assert centers[2][0] == pytest.approx(1.0, abs=1e-12)
    assert centers[2][1] == pytest.approx(0.0, abs=1e-12)


def test_univariate_fiber_degree_mismatch():
    with pytest.raises(FiberCountMismatch):
        univariate_fiber(poly1([(2, 1), (0, -1)]), 3, CTX)


def test_univariate_fiber_double_root():
    # a branch point under the fiber: certification cannot split x^2
    with pytest.raises(FiberCountMismatch):
        univariate_fiber(poly1([(2, 1)]), 2, CTX)


def test_univariate_fiber_rejects_multivariate():
    with pytest.raises(ValueError):
        univariate_fiber(MPoly(2, {(1, 1): mpq(1)}), 2, CTX)


def test_fiber_from_points_accepts_good_approximations():
    system = SquareSystem([poly1([(2, 1), (0, mpq(-1, 2))])])
    pts = [[(mpq(707, 1000), mpq(0))], [(mpq(-707, 1000), mpq(0))]]
    fib = fiber_from_points(system, pts, 2, CTX)
    assert fib.degree == 2
    lo, hi = fib.boxes
    assert float(lo.x[0].re) == pytest.approx(-0.7071067811865476, abs=1e-9)
    assert float(hi.x[0].re) == pytest.approx(0.7071067811865476, abs=1e-9)


def test_fiber_from_points_count_mismatch():
    system = SquareSystem([poly1([(2, 1), (0, mpq(-1, 2))])])
    with pytest.raises(FiberCountMismatch):
        fiber_from_points(system, [[(mpq(707, 1000), mpq(0))]], 2, CTX)
    # duplicates fuse into one certified zero
    pts = [
        [(mpq(707, 1000), mpq(0))],
        [(mpq(7071, 10000), mpq(0))],
    ]
    with pytest.raises(FiberCountMismatch):
        fiber_from_points(system, pts, 2, CTX)


def test_fiber_from_points_arity_check():
    system = SquareSystem([poly1([(2, 1), (0, mpq(-1, 2))])])
    with pytest.raises(ValueError):
        fiber_from_points(system, [[(mpq(1), mpq(0)), (mpq(0), mpq(0))]], 2, CTX)


def test_bootstrap_fiber_plain():
    fib = bootstrap_fiber(power_map(2), BASE, 2, seed=0, ctx=CTX)
    assert fib.degree == 2
    assert float(fib.boxes[0].x[0].re) == pytest.approx(-0.70710678, abs=1e-7)
    assert float(fib.boxes[1].x[0].re) == pytest.approx(0.70710678, abs=1e-7)


def test_bootstrap_fiber_enlarged_projects():
    enlarged = ParametricSystem(
        [
            MPoly(3, {(0, 2, 0): mpq(1), (1, 0, 0): mpq(-1)}),
            MPoly(3, {(0, 1, 1): mpq(1), (0, 0, 0): mpq(-1)}),
        ],
        CTX,
    )
    fib = bootstrap_fiber(
        enlarged, BASE, 2, seed=0, ctx=CTX, reduced=power_map(2)
    )
    assert fib.degree == 2
    assert all(len(m.x) == 1 for m in fib.boxes)
    assert float(fib.boxes[0].x[0].re) == pytest.approx(-0.70710678, abs=1e-7)


def test_bootstrap_fiber_wrong_declared_degree():
    with pytest.raises(FiberCountMismatch):
        bootstrap_fiber(power_map(2), BASE, 3, seed=0, ctx=CTX, attempts=2)


def test_bootstrap_fiber_rejects_degree_zero():
    with pytest.raises(ValueError):
        bootstrap_fiber(power_map(2), BASE, 0, seed=0, ctx=CTX)


def test_fiber_requires_boxes():
    system = SquareSystem([poly1([(2, 1), (0, -1)])])
    with pytest.raises(ValueError):
        Fiber(system, [], BASE)


# --------------------------------------------------------------- monodromy


def fiber_of(f, d, seed=0):
    return bootstrap_fiber(f, BASE, d, seed=seed, ctx=CTX)


def test_square_map_loop_permutations():
    f = power_map(2)
    fib = fiber_of(f, 2)
    loop0, loop1 = standard_loops(BASE, mpq(1, 2), CTX)
    assert loop_permutation(f, fib, loop0, CFG) == Permutation.from_cycles(
        "(1,2)", 2
    )
    assert loop_permutation(f, fib, loop1, CFG).is_identity()


def test_cube_map_triple():
    f = power_map(3)
    tri = monodromy_triple(f, fiber_of(f, 3), CFG)
    assert tri.s0.cycle_type() == (3,)
    assert tri.s1.is_identity()
    assert tri.sinf.cycle_type() == (3,)


def test_four_x_one_minus_x_triple():
    f = ParametricSystem(
        [MPoly(2, {(0, 1): mpq(4), (0, 2): mpq(-4), (1, 0): mpq(-1)})], CTX
    )
    tri = monodromy_triple(f, fiber_of(f, 2), CFG)
    assert tri.cycle_types() == ((1, 1), (2,), (2,))


def degree3_fixture():
    # 3x^2 - 2x^3: branch points at 0, 1 and a triple pole at infinity
    f = ParametricSystem(
        [MPoly(2, {(0, 2): mpq(3), (0, 3): mpq(-2), (1, 0): mpq(-1)})], CTX
    )
    return f, fiber_of(f, 3)


def test_bending_cubic_triple():
    f, fib = degree3_fixture()
    tri = monodromy_triple(f, fib, CFG)
    assert tri.cycle_types() == ((2, 1), (2, 1), (3,))
    assert (tri.s0 * tri.s1 * tri.sinf).is_identity()


def test_product_loop_reads_s0_s1():
    f, fib = degree3_fixture()
    tri = monodromy_triple(f, fib, CFG)
    big = product_loop(BASE, CTX)
    assert loop_permutation(f, fib, big, CFG) == tri.s0 * tri.s1


def test_radius_independence():
    f, fib = degree3_fixture()
    tri_half = monodromy_triple(f, fib, CFG, radius=mpq(1, 2))
    tri_quarter = monodromy_triple(f, fib, CFG, radius=mpq(1, 4))
    assert tri_half == tri_quarter


def test_reversed_loop_gives_inverse():
    # a 3-cycle, so the inverse differs from the forward permutation
    f = power_map(3)
    fib = fiber_of(f, 3)
    loop0, _ = standard_loops(BASE, mpq(1, 2), CTX)
    fwd = loop_permutation(f, fib, loop0, CFG)
    rev = loop_permutation(f, fib, loop0.reversed(), CFG)
    assert fwd.cycle_type() == (3,)
    assert rev == fwd.inverse()
    assert rev != fwd


def test_elimination_matches_full_run():
    f, fib = degree3_fixture()
    loop0, _ = standard_loops(BASE, mpq(1, 2), CTX)
    with_halt = loop_permutation(f, fib, loop0, CFG, early_halt=True)
    without = loop_permutation(f, fib, loop0, CFG, early_halt=False)
    assert with_halt == without


def test_threaded_matches_sequential():
    f, fib = degree3_fixture()
    tri_seq = monodromy_triple(f, fib, CFG, threads=1)
    tri_par = monodromy_triple(f, fib, CFG, threads=4)
    assert tri_seq == tri_par


def test_triple_product_identity_power_maps():
    for d in (2, 3, 4):
        f = power_map(d)
        tri = monodromy_triple(f, fiber_of(f, d), CFG)
        assert (tri.s0 * tri.s1 * tri.sinf).is_identity()
        assert tri.s0.cycle_type() == (d,)
        assert tri.s1.is_identity()


def test_degree_one_fiber_trivial_permutation():
    f = ParametricSystem(
        [MPoly(2, {(0, 1): mpq(1), (1, 0): mpq(-1)})], CTX
    )
    fib = fiber_of(f, 1)
    loop0, _ = standard_loops(BASE, mpq(1, 2), CTX)
    assert loop_permutation(f, fib, loop0, CFG).is_identity()


def test_deterministic_across_calls():
    f = power_map(3)
    f1 = fiber_of(f, 3, seed=5)
    f2 = fiber_of(f, 3, seed=5)
    k1 = [
        (mpq(p.re), mpq(p.im)) for m in f1.boxes for p in m.x
    ]
    k2 = [
        (mpq(p.re), mpq(p.im)) for m in f2.boxes for p in m.x
    ]
    assert k1 == k2
