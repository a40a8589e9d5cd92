"""Fiber computation over the base point and monodromy extraction.

Loops around the branch points 0 and 1 are diamonds anchored at the
base point b.  Their winding numbers are verified exactly on the dyadic
vertex coordinates before any tracking happens, so the homotopy class
of what gets tracked is never in doubt.

Composition convention: (s * t)(i) = t(s(i)); tracking a concatenation
of loops left-to-right multiplies the permutations left-to-right, and
s0 * s1 * sinf = identity.
"""

from __future__ import annotations

import dataclasses
import math
import random
import threading
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from typing import Optional, Sequence

from gmpy2 import mpfr, mpq

from .certify import (
    RHO_CORRECT,
    MooreBox,
    certify_approx,
    project_box,
    refine,
    same_zero,
)
from .errors import (
    Cancelled,
    CertifyFailed,
    DegenerateLoop,
    Diverged,
    FiberCountMismatch,
    MatchFailed,
    RefineStalled,
    Stalled,
)
from .group import Permutation, PermutationTriple
from .interval import CPoint, ComplexInterval
from .polysys import MPoly, ParametricSystem, SquareSystem
from .prec import Ctx
from .track import PLPath, TrackConfig, track_path, track_segment


# ----------------------------------------------------------------- geometry


def _on_segment(ax, ay, bx, by, px, py) -> bool:
    """Exact test: does (px, py) lie on the closed segment a-b?"""
    cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    if cross != 0:
        return False
    return min(ax, bx) <= px <= max(ax, bx) and min(ay, by) <= py <= max(ay, by)


def winding_number(path: PLPath, px, py) -> int:
    """Winding of a closed PL path around an exact rational point.

    Computed exactly from the dyadic vertex coordinates by counting
    signed crossings of the rightward horizontal ray.  Raises
    DegenerateLoop if the point lies on the path.
    """
    px, py = mpq(px), mpq(py)
    verts = [(mpq(v.re), mpq(v.im)) for v in path.vertices]
    if verts[0] != verts[-1]:
        raise ValueError("winding number needs a closed path")
    total = 0
    for (ax, ay), (bx, by) in zip(verts, verts[1:]):
        if _on_segment(ax, ay, bx, by, px, py):
            raise DegenerateLoop(f"path passes through ({px}, {py})")
        if ay <= py < by:          # upward crossing
            x_at = ax + (bx - ax) * (py - ay) / (by - ay)
            if x_at > px:
                total += 1
        elif by <= py < ay:        # downward crossing
            x_at = ax + (bx - ax) * (py - ay) / (by - ay)
            if x_at > px:
                total -= 1
    return total


def _loop_from_rationals(pairs, ctx: Ctx) -> PLPath:
    try:
        return PLPath.from_rationals(pairs, ctx)
    except ValueError as exc:
        raise DegenerateLoop(str(exc)) from exc


def _require_windings(path: PLPath, w0: int, w1: int) -> None:
    got0 = winding_number(path, 0, 0)
    got1 = winding_number(path, 1, 0)
    if got0 != w0 or got1 != w1:
        raise DegenerateLoop(
            f"loop winds ({got0}, {got1}) around (0, 1); needed ({w0}, {w1})"
        )


def standard_loops(b, radius, ctx: Ctx):
    """Counterclockwise diamond loops around 0 and 1, both based at b.

    b is an exact (re, im) rational pair, radius an exact rational.
    The loops are built from dyadic vertices, then their winding
    numbers around 0 and 1 are certified exactly: loop0 winds (+1, 0)
    and loop1 winds (0, +1).
    """
    b_re, b_im = mpq(b[0]), mpq(b[1])
    r = mpq(radius)
    if r <= 0:
        raise DegenerateLoop("loop radius must be positive")
    loop0 = _loop_from_rationals(
        [(b_re, b_im), (0, r), (-r, 0), (0, -r), (b_re, b_im)], ctx
    )
    loop1 = _loop_from_rationals(
        [(b_re, b_im), (1, -r), (1 + r, 0), (1, r), (b_re, b_im)], ctx
    )
    _require_windings(loop0, 1, 0)
    _require_windings(loop1, 0, 1)
    return loop0, loop1


def product_loop(b, ctx: Ctx) -> PLPath:
    """One big loop homotopic to loop0 followed by loop1.

    Leaves b over the top, comes down the far left side, sweeps the
    bottom rightward past both branch points, and returns over the
    top: reading cut crossings in traversal order gives the word
    s0 * s1.  Both winding numbers are certified to be +1.
    """
    b_re, b_im = mpq(b[0]), mpq(b[1])
    up = b_im + 2
    path = _loop_from_rationals(
        [
            (b_re, b_im),
            (b_re, up),
            (-1, up),
            (-1, -1),
            (2, -1),
            (2, up),
            (b_re, up),
            (b_re, b_im),
        ],
        ctx,
    )
    _require_windings(path, 1, 1)
    return path


# -------------------------------------------------------------------- fiber

# wall-clock budget per bootstrap path; a cancelled path is discarded
# like a divergent one and the count check plus seed retries recover
BOOTSTRAP_PATH_SECONDS = 30.0


class Fiber:
    """Certified boxes for the d points of the fiber over the base.

    boxes are 1/8-boxes in the canonical order: sorted by the exact
    lexicographic key (Re x1, Im x1, Re x2, ...) of their centers.
    """

    __slots__ = ("system", "boxes", "base")

    def __init__(self, system: SquareSystem, boxes: Sequence[MooreBox], base):
        self.system = system
        self.boxes = tuple(boxes)
        if not self.boxes:
            raise ValueError("empty fiber")
        self.base = (mpq(base[0]), mpq(base[1]))

    @property
    def degree(self) -> int:
        return len(self.boxes)

    def __repr__(self) -> str:
        return f"Fiber(d={self.degree}, base=({self.base[0]}, {self.base[1]}))"


def _center_key(m: MooreBox):
    out = []
    for p in m.x:
        out.append(mpq(p.re))
        out.append(mpq(p.im))
    out.append(mpq(m.r))
    return tuple(out)


def _canonical_boxes(system, boxes, ctx: Ctx):
    refined = [refine(system, m, RHO_CORRECT, ctx) for m in boxes]
    refined.sort(key=_center_key)
    return refined


def _dedupe(system, boxes, ctx: Ctx):
    kept: list = []
    for m in boxes:
        if not any(same_zero(system, m, k, ctx) for k in kept):
            kept.append(m)
    return kept


def _unit_point(theta: float) -> CPoint:
    return CPoint(mpfr(math.cos(theta)), mpfr(math.sin(theta)))


def _start_tuples(degrees, ctx: Ctx):
    """Cartesian products of approximate d_i-th roots of unity."""
    tuples = [()]
    for k in degrees:
        roots = [_unit_point(2 * math.pi * j / k) for j in range(k)]
        tuples = [t + (r,) for t in tuples for r in roots]
    return tuples


def _bootstrap_config(cfg: Optional[TrackConfig], ctx: Ctx) -> TrackConfig:
    base = cfg if cfg is not None else TrackConfig(prec=ctx.prec)
    if base.mode == "bootstrap":
        return base
    return dataclasses.replace(base, mode="bootstrap")


def _total_degree_homotopy(
    f_at_b: SquareSystem, degrees, gamma: ComplexInterval, ctx: Ctx
) -> ParametricSystem:
    """H(s, x) = (1-s) * gamma * (x_i^{d_i} - 1) + s * F_b(x)."""
    n = f_at_b.n
    s = MPoly.var(n + 1, 0)
    one_minus_s = MPoly.const(n + 1, mpq(1)).sub(s, ctx)
    polys = []
    for i, (p, deg) in enumerate(zip(f_at_b.polys, degrees)):
        exps = [0] * (n + 1)
        exps[i + 1] = deg
        g = MPoly(n + 1, {tuple(exps): mpq(1), (0,) * (n + 1): mpq(-1)})
        start_part = one_minus_s.mul(g, ctx).scale(gamma, ctx)
        target_part = s.mul(p.lift_var(0), ctx)
        polys.append(start_part.add(target_part, ctx))
    return ParametricSystem(polys, ctx)


def _recertify_endpoints(system: SquareSystem, endpoints, ctx: Ctx):
    """Re-certify homotopy endpoints directly against the target system."""
    fresh = []
    for m in endpoints:
        try:
            fresh.append(certify_approx(system, m.x, ctx))
        except CertifyFailed:
            continue
    return _dedupe(system, fresh, ctx)


def bootstrap_fiber(
    f_enlarged: ParametricSystem,
    b,
    d: int,
    seed: int,
    ctx: Ctx,
    cfg: Optional[TrackConfig] = None,
    reduced: Optional[ParametricSystem] = None,
    attempts: int = 3,
) -> Fiber:
    """Capture the whole fiber over b with a total-degree homotopy.

    f_enlarged is parametric in t; it is specialized at t = b here.
    When it carries an auxiliary last variable protecting a
    denominator, pass the matching reduced parametric system to get
    projected boxes.  Start system: gamma * (x_i^{d_i} - 1) with a
    random unit gamma; every Bezout path is tracked in bootstrap mode
    and divergent or stalled paths are discarded.  Correctness rests
    on the endpoint count: the certified, pairwise-distinct zeros must
    number exactly d, as must their projections.
    """
    if d < 1:
        raise ValueError("declared degree must be positive")
    b_re, b_im = mpq(b[0]), mpq(b[1])
    t_iv = ComplexInterval.from_rationals(b_re, b_im, ctx)
    f_at_b = f_enlarged.specialize(t_iv, ctx)
    red_at_b = reduced.specialize(t_iv, ctx) if reduced is not None else None
    cfg = _bootstrap_config(cfg, ctx)
    # Start degree of equation i is its degree in variable i.  For the
    # usual shape (map equation, then q*z - 1 with z linear) this keeps
    # the path count at d and avoids tracking toward infinity; missed
    # zeros are impossible to certify past the count check anyway.  The
    # last attempt falls back to full total degrees.
    own_degrees = [
        max(p.deg_in(i), 1) for i, p in enumerate(f_at_b.polys)
    ]
    total_degrees = [max(p.total_degree(), 1) for p in f_at_b.polys]
    last_exc: Optional[Exception] = None
    for attempt in range(attempts):
        degrees = own_degrees
        if attempt == attempts - 1 and attempts > 1:
            degrees = total_degrees
        # int-only seed: string hashes are salted per process
        rng = random.Random(1000003 * seed + attempt)
        gamma = ComplexInterval.point(_unit_point(rng.uniform(0, 2 * math.pi)))
        homotopy = _total_degree_homotopy(f_at_b, degrees, gamma, ctx)
        start_sys = homotopy.specialize(
            ComplexInterval.from_rationals(0, 0, ctx), ctx
        )
        endpoints = []
        for start in _start_tuples(degrees, ctx):
            cancel = threading.Event()
            watchdog = threading.Timer(BOOTSTRAP_PATH_SECONDS, cancel.set)
            watchdog.start()
            try:
                m0 = certify_approx(start_sys, start, ctx)
                endpoints.append(
                    track_segment(homotopy, m0, cfg, cancel=cancel)
                )
            except (CertifyFailed, Diverged, Stalled, Cancelled) as exc:
                last_exc = exc
                continue
            finally:
                watchdog.cancel()
        try:
            kept = _recertify_endpoints(f_at_b, endpoints, ctx)
            if len(kept) != d:
                last_exc = FiberCountMismatch(
                    f"found {len(kept)} distinct fiber points, declared"
                    f" degree {d} (seed {seed}, attempt {attempt})"
                )
                continue
            target = f_at_b
            if red_at_b is not None:
                kept = [project_box(f_at_b, red_at_b, m, ctx) for m in kept]
                kept = _dedupe(red_at_b, kept, ctx)
                if len(kept) != d:
                    last_exc = FiberCountMismatch(
                        f"projection collapsed the fiber to {len(kept)} points"
                    )
                    continue
                target = red_at_b
            return Fiber(target, _canonical_boxes(target, kept, ctx), (b_re, b_im))
        except (RefineStalled, CertifyFailed) as exc:
            last_exc = exc
            continue
    if isinstance(last_exc, FiberCountMismatch):
        raise last_exc
    raise FiberCountMismatch(f"no attempt captured {d} fiber points") from last_exc


def _coeff_point(c, ctx: Ctx) -> CPoint:
    if isinstance(c, ComplexInterval):
        return c.mid(ctx)
    return CPoint.from_rationals(mpq(c), 0, ctx)


def univariate_fiber(
    p: MPoly, d: int, ctx: Ctx, base=(mpq(1, 2), mpq(0)), seed: int = 0
) -> Fiber:
    """Fiber of a univariate polynomial.

    Simultaneous Aberth iteration on the midpoint coefficients finds
    approximations; each is then independently certified, deduplicated,
    and counted against the declared degree.
    """
    if p.nvars != 1:
        raise ValueError("univariate_fiber needs a one-variable polynomial")
    if p.deg_in(0) != d:
        raise FiberCountMismatch(
            f"polynomial degree {p.deg_in(0)} does not match declared {d}"
        )
    system = SquareSystem([p])
    boxes = []
    for z in _aberth_roots(p, d, ctx, seed):
        try:
            boxes.append(certify_approx(system, (z,), ctx))
        except CertifyFailed:
            continue
    kept = _dedupe(system, boxes, ctx)
    if len(kept) != d:
        raise FiberCountMismatch(
            f"certified {len(kept)} distinct roots, declared degree {d}"
        )
    return Fiber(system, _canonical_boxes(system, kept, ctx), base)


def fiber_from_points(
    system, points, d: int, ctx: Ctx, base=(mpq(1, 2), mpq(0))
) -> Fiber:
    """Certify externally supplied fiber approximations.

    Each point is a sequence of exact (re, im) rational pairs, one per
    variable of the specialized system.  Points are certified
    independently, fused when they pin the same zero, and the surviving
    count must equal the declared degree.
    """
    boxes = []
    for pt in points:
        xs = tuple(CPoint.from_rationals(re, im, ctx) for re, im in pt)
        if len(xs) != system.n:
            raise ValueError(
                f"start point has {len(xs)} coordinates, system has {system.n}"
            )
        boxes.append(certify_approx(system, xs, ctx))
    kept = _dedupe(system, boxes, ctx)
    if len(kept) != d:
        raise FiberCountMismatch(
            f"start fiber certified to {len(kept)} distinct points,"
            f" declared degree {d}"
        )
    return Fiber(system, _canonical_boxes(system, kept, ctx), base)


def _aberth_roots(p: MPoly, d: int, ctx: Ctx, seed: int):
    coeffs = [CPoint.zero() for _ in range(d + 1)]
    for (e,), c in p.terms.items():
        coeffs[e] = _coeff_point(c, ctx)
    rng = random.Random(2 * seed + 1)
    lead = max(float(coeffs[d].norm_inf(ctx)), 1e-300)
    bound = 1.0
    for c in coeffs[:d]:
        bound = max(bound, 2.0 * float(c.norm_inf(ctx)) / lead)

    zs = []
    for j in range(d):
        theta = 2 * math.pi * (j + 0.37) / d + rng.uniform(-0.1, 0.1)
        rad = bound * (0.5 + 0.4 * rng.random())
        zs.append(CPoint(mpfr(rad * math.cos(theta)), mpfr(rad * math.sin(theta))))

    one = CPoint(mpfr(1), mpfr(0))

    def poly_and_deriv(z: CPoint):
        acc = coeffs[d]
        dacc = CPoint.zero()
        for k in range(d - 1, -1, -1):
            dacc = dacc.mul(z, ctx).add(acc, ctx)
            acc = acc.mul(z, ctx).add(coeffs[k], ctx)
        return acc, dacc

    tol = mpfr(2) ** (-(ctx.prec * 3) // 4)
    for _ in range(200):
        moved = mpfr(0)
        for i in range(d):
            pv, dv = poly_and_deriv(zs[i])
            try:
                newton = pv.div(dv, ctx)
            except ZeroDivisionError:
                zs[i] = zs[i].add(
                    CPoint(mpfr(rng.uniform(-0.5, 0.5)), mpfr(rng.uniform(-0.5, 0.5))),
                    ctx,
                )
                moved = mpfr(1)
                continue
            acc = CPoint.zero()
            for j in range(d):
                if j != i:
                    diff = zs[i].sub(zs[j], ctx)
                    try:
                        acc = acc.add(one.div(diff, ctx), ctx)
                    except ZeroDivisionError:
                        acc = acc.add(CPoint(mpfr(1e18), mpfr(0)), ctx)
            denom = one.sub(newton.mul(acc, ctx), ctx)
            try:
                step = newton.div(denom, ctx)
            except ZeroDivisionError:
                step = newton
            zs[i] = zs[i].sub(step, ctx)
            moved = max(moved, step.norm_inf(ctx))
        if moved <= tol:
            break
    return zs


# --------------------------------------------------------------- monodromy


def _match_endpoint(fiber: Fiber, end: MooreBox, ctx: Ctx) -> int:
    hits = [
        i
        for i, box in enumerate(fiber.boxes)
        if same_zero(fiber.system, end, box, ctx)
    ]
    if len(hits) != 1:
        raise MatchFailed(
            f"loop endpoint matched {len(hits)} fiber points; fiber invalid"
            " or tracking left the certified region"
        )
    return hits[0]


def loop_permutation(
    f: ParametricSystem,
    fiber: Fiber,
    loop: PLPath,
    cfg: TrackConfig,
    threads: int = 1,
    early_halt: bool = True,
) -> Permutation:
    """Permutation of the fiber induced by tracking around one loop.

    Runs one certified tracking job per fiber point and matches each
    endpoint back to the fiber.  Once d-1 images are known the last
    job is cancelled (or never started) and its image filled in by
    elimination; bijectivity is enforced throughout.
    """
    d = fiber.degree
    ctx = Ctx(cfg.prec)
    if d == 1:
        return Permutation.identity(1)
    images: list = [None] * d
    cancel = threading.Event()

    def record(i: int, img: int) -> None:
        if images[i] is not None or img in images:
            raise MatchFailed("two loop endpoints matched one fiber point")
        images[i] = img

    matched = 0
    if threads <= 1:
        for i in range(d):
            if early_halt and matched == d - 1:
                break
            end = track_path(f, loop, fiber.boxes[i], cfg, cancel=cancel)
            record(i, _match_endpoint(fiber, end, ctx))
            matched += 1
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {
                pool.submit(track_path, f, loop, fiber.boxes[i], cfg, cancel=cancel): i
                for i in range(d)
            }
            pending = set(futures)
            try:
                while pending and matched < d - 1:
                    done, pending = wait(pending, return_when=FIRST_COMPLETED)
                    for fut in done:
                        if early_halt and matched == d - 1:
                            break
                        end = fut.result()
                        record(futures[fut], _match_endpoint(fiber, end, ctx))
                        matched += 1
                        if early_halt and matched == d - 1:
                            cancel.set()
                if not early_halt:
                    for fut in pending:
                        end = fut.result()
                        record(futures[fut], _match_endpoint(fiber, end, ctx))
                        matched += 1
            finally:
                cancel.set()
    missing = [i for i in range(d) if images[i] is None]
    if matched < d - 1 or len(missing) > 1:
        raise MatchFailed(f"only {matched} of {d} paths produced usable endpoints")
    if missing:
        taken = set(im for im in images if im is not None)
        free = [v for v in range(d) if v not in taken]
        if len(free) != 1:
            raise MatchFailed("elimination left an inconsistent image set")
        images[missing[0]] = free[0]
    return Permutation(images)


def monodromy_triple(
    f: ParametricSystem,
    fiber: Fiber,
    cfg: TrackConfig,
    threads: int = 1,
    radius=mpq(1, 2),
) -> PermutationTriple:
    """The triple (s0, s1, sinf) with sinf computed, never tracked."""
    ctx = Ctx(cfg.prec)
    loop0, loop1 = standard_loops(fiber.base, radius, ctx)
    s0 = loop_permutation(f, fiber, loop0, cfg, threads=threads)
    s1 = loop_permutation(f, fiber, loop1, cfg, threads=threads)
    return PermutationTriple(s0, s1, (s0 * s1).inverse())
