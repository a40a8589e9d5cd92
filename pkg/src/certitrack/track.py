"""Certified path tracking along piecewise-linear parameter paths.

The tracker alternates two certified moves and nothing else:

  correct   refine the current Moore box to contraction 1/8 at the
            exact parameter value t;
  predict   advance to t + delta if the box still certifies at 7/8
            with the parameter replaced by the interval [t, t + delta].

The parameter value is kept as an exact rational throughout (all step
sizes are dyadic), so there is no drift.  Step sizes double after each
accepted step and halve on rejection; when they collapse below
delta_min the working precision doubles, up to the configured ceiling.
Failure is always an exception, never a wrong box.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from gmpy2 import mpfr, mpq

from .certify import (
    MooreBox,
    RHO_CORRECT,
    RHO_PREDICT,
    certify_approx,
    mid_inverse,
    moore_check,
    refine,
    shrunken_radius,
)
from .errors import Cancelled, CertifyFailed, Diverged, RefineStalled, Stalled
from .interval import ComplexInterval, CPoint, RealInterval, ball_within_ball
from .polysys import ParametricSystem, compose_segment
from .prec import Ctx


@dataclass(frozen=True)
class TrackConfig:
    prec: int = 53
    max_prec: int = 4096
    delta_init: mpq = mpq(1, 8)
    delta_growth: mpq = mpq(2)
    delta_min: mpq = mpq(1, 2**60)
    diverge_norm: int = 10**8
    mode: str = "strict"
    trace: Optional[Callable[[str], None]] = None

    def __post_init__(self):
        if self.prec < 4:
            raise ValueError("prec must be at least 4 bits")
        if self.max_prec < self.prec:
            raise ValueError("max_prec must be at least prec")
        if not 0 < mpq(self.delta_init) <= 1:
            raise ValueError("delta_init must lie in (0, 1]")
        if mpq(self.delta_growth) <= 1:
            raise ValueError("delta_growth must exceed 1")
        if not 0 < mpq(self.delta_min) <= mpq(self.delta_init):
            raise ValueError("delta_min must lie in (0, delta_init]")
        if self.diverge_norm <= 0:
            raise ValueError("diverge_norm must be positive")
        if self.mode not in ("strict", "bootstrap"):
            raise ValueError(f"unknown mode {self.mode!r}")


class PLPath:
    """Piecewise-linear path given by exact complex vertices."""

    __slots__ = ("vertices",)

    def __init__(self, vertices: Sequence[CPoint]):
        vs = tuple(vertices)
        if len(vs) < 2:
            raise ValueError("a path needs at least two vertices")
        for a, b in zip(vs, vs[1:]):
            if a == b:
                raise ValueError("consecutive path vertices coincide")
        self.vertices = vs

    @classmethod
    def from_rationals(cls, pairs: Sequence, ctx: Ctx) -> "PLPath":
        return cls([CPoint.from_rationals(re, im, ctx) for re, im in pairs])

    def segments(self) -> list:
        return list(zip(self.vertices, self.vertices[1:]))

    def is_closed(self) -> bool:
        return self.vertices[0] == self.vertices[-1]

    def reversed(self) -> "PLPath":
        return PLPath(tuple(reversed(self.vertices)))

    def __len__(self) -> int:
        return len(self.vertices)

    def __repr__(self) -> str:
        return f"PLPath({len(self.vertices)} vertices)"


def _check_cancel(cancel) -> None:
    if cancel is not None and cancel.is_set():
        raise Cancelled("tracking cancelled")


def _param_interval(t_lo: mpq, t_hi: mpq, ctx: Ctx) -> ComplexInterval:
    return ComplexInterval(
        RealInterval(ctx.to_dn(t_lo), ctx.to_up(t_hi)),
        RealInterval(mpfr(0), mpfr(0)),
    )


def predict_step(f: ParametricSystem, t: mpq, delta: mpq, m: MooreBox, ctx: Ctx) -> bool:
    """True if the box certifies at 7/8 over the whole interval [t, t+delta]."""
    view = f.view(_param_interval(t, t + delta, ctx), ctx)
    return moore_check(view, m.x, m.r, m.A, RHO_PREDICT, ctx)


def _escalate(f: ParametricSystem, t: mpq, m: MooreBox, cfg: TrackConfig, ctx: Ctx):
    new_prec = ctx.prec * 2
    if new_prec > cfg.max_prec:
        raise Stalled(
            f"tracking requires more than max_prec={cfg.max_prec} bits at t={t}"
        )
    c2 = Ctx(new_prec)
    view = f.view(_param_interval(t, t, c2), c2)
    try:
        m2 = certify_approx(view, m.x, c2)
    except CertifyFailed as exc:
        raise Stalled(f"re-certification failed at {new_prec} bits, t={t}") from exc
    if not ball_within_ball(m2.x, shrunken_radius(m2, c2), m.x, m.r, c2):
        raise Stalled(
            f"re-certification at {new_prec} bits left the tracked ball at t={t}"
        )
    return c2, m2


def _trace_line(cfg: TrackConfig, t: mpq, delta: mpq, m: MooreBox, ctx: Ctx) -> None:
    if cfg.trace is None:
        return
    cfg.trace(
        f"t={float(t):.10g} delta={float(delta):.10g} "
        f"r={float(m.r):.6g} prec={ctx.prec}"
    )


def track_segment(
    f: ParametricSystem,
    m0: MooreBox,
    cfg: TrackConfig,
    *,
    cancel: Optional[threading.Event] = None,
    initial_delta=None,
) -> MooreBox:
    """Track one certified zero of f from parameter 0 to 1.

    m0 must certify a zero of the specialization at 0.  Returns a
    1/8-box at parameter 1 for the analytic continuation of that zero.
    """
    ctx = Ctx(cfg.prec)
    t = mpq(0)
    delta = mpq(initial_delta) if initial_delta is not None else mpq(cfg.delta_init)
    delta = min(max(delta, mpq(cfg.delta_min)), mpq(1))
    m = m0
    easy_corrections = 0
    growth_cooldown = 0
    while True:
        _check_cancel(cancel)
        view = f.view(_param_interval(t, t, ctx), ctx)
        try:
            m = refine(view, m, RHO_CORRECT, ctx)
        except RefineStalled:
            ctx, m = _escalate(f, t, m, cfg, ctx)
            continue
        if m.center_norm_inf(ctx) > cfg.diverge_norm:
            if cfg.mode == "bootstrap":
                raise Diverged(f"path left the divergence ball at t={t}")
            raise Diverged(
                f"tracked point exceeded diverge_norm at t={t}; "
                "in strict mode this indicates corrupt inputs"
            )
        _trace_line(cfg, t, delta, m, ctx)
        if t == 1:
            return m
        easy_corrections += 1
        if easy_corrections >= 3:
            # Let the radius track the local scale of the solution;
            # step size is capped by r, so without this a path heading
            # to infinity crawls instead of progressing geometrically.
            # A fresh midpoint inverse is essential: the stored A goes
            # stale as the point moves and blocks any radius growth.
            fresh = mid_inverse(view.jac_mid(m.x, ctx), ctx)
            a_grow = fresh if fresh is not None else m.A
            for _ in range(6):
                grown = ctx.ne.mul(m.r, mpfr(2))
                if not moore_check(view, m.x, grown, a_grow, RHO_CORRECT, ctx):
                    break
                m = MooreBox(m.x, grown, a_grow, RHO_CORRECT)
            easy_corrections = 0
        if growth_cooldown > 0:
            growth_cooldown -= 1
            want = delta
        else:
            want = delta * mpq(cfg.delta_growth)
        step = min(want, 1 - t)
        probing_growth = step > delta
        escalated = False
        while True:
            _check_cancel(cancel)
            if step < cfg.delta_min:
                ctx, m = _escalate(f, t, m, cfg, ctx)
                easy_corrections = 0
                escalated = True
                break
            if predict_step(f, t, step, m, ctx):
                break
            if probing_growth:
                # back off before paying for the next growth probe
                growth_cooldown = 4
                probing_growth = False
            step = step / 2
        if escalated:
            continue
        t = t + step
        delta = step


def track_path(
    f: ParametricSystem,
    path: PLPath,
    m0: MooreBox,
    cfg: TrackConfig,
    *,
    cancel: Optional[threading.Event] = None,
) -> MooreBox:
    """Track a certified zero along every segment of a PL path.

    f is parametric in the path coordinate: each segment is composed to
    run over [0, 1] before tracking.  The first step of each segment
    uses delta_init scaled by the segment count.
    """
    segs = path.segments()
    ctx = Ctx(cfg.prec)
    first_delta = mpq(cfg.delta_init) / len(segs)
    m = m0
    for a, b in segs:
        _check_cancel(cancel)
        f_seg = compose_segment(f, a, b, ctx)
        m = track_segment(f_seg, m, cfg, cancel=cancel, initial_delta=first_delta)
    return m
