"""End-to-end verification: exact model equations in, one status out.

A model over a number field is compiled into a parametric system with
interval coefficients, the fiber over the base point is captured and
certified, the monodromy triple is extracted, and the result is
compared against the declared triple.  The comparison ladder is
PASS (simultaneously conjugate), PASS_UP_TO_S3 (conjugate after a
branch point relabeling), PASS_INVERSE (conjugate to the orientation
flip), FAIL_TRIPLE.

verify_entry never raises: every failure mode of the pipeline is
folded into the report together with the phase that produced it.  On
tracker stall the pipeline re-embeds the field generator with a
tighter interval and doubles the working precision, since a loose
coefficient interval is the usual culprit.
"""

from __future__ import annotations

import dataclasses
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Optional, Union

from gmpy2 import mpq

from .errors import (
    CertitrackError,
    DegenerateModel,
    InvalidTriple,
    NotCoprime,
    Stalled,
)
from .group import Permutation, PermutationTriple, s3_orbit, simultaneously_conjugate
from .interval import ComplexInterval
from .monodromy import (
    bootstrap_fiber,
    fiber_from_points,
    monodromy_triple,
    univariate_fiber,
)
from .numberfield import EmbeddingBox, NFElement, NumberField, embed_root, resultant
from .polysys import MPoly, ParametricSystem, substitute_nu
from .prec import Ctx
from .track import TrackConfig

# retry policy on Stalled: tighten the embedding, double the precision
RETRY_LIMIT = 3
TIGHTEN_BITS = 16

PASSING_STATUSES = ("PASS", "PASS_UP_TO_S3", "PASS_INVERSE")


# ----------------------------------------------------------------- models


@dataclass(frozen=True)
class P1Model:
    """Map p/q on the line itself; num and den are univariate."""

    num: MPoly
    den: MPoly


@dataclass(frozen=True)
class SmoothModel:
    """Affine chart of a smooth curve carrying the map num/den.

    chart_eqs are the n-1 equations cutting the chart out of n-space;
    num and den live in the same n variables.  Smoothness is trusted
    input: a singular chart surfaces downstream as certification or
    count failures, never as a wrong certified answer.
    """

    chart_eqs: tuple
    num: MPoly
    den: MPoly

    def __post_init__(self):
        object.__setattr__(self, "chart_eqs", tuple(self.chart_eqs))


@dataclass(frozen=True)
class PlaneModel:
    """Possibly singular plane curve f(t, x) with scaling constant lam.

    The induced map is lam times the projection on t, so tracking uses
    f with t replaced by lam^-1 t.
    """

    curve: MPoly
    lam: object

    def __post_init__(self):
        if not isinstance(self.lam, NFElement):
            object.__setattr__(self, "lam", mpq(self.lam))


BelyiModel = Union[P1Model, SmoothModel, PlaneModel]


@dataclass(frozen=True)
class BelyiEntry:
    """One verification target: equations plus the declared triple."""

    label: str
    degree: int
    field: NumberField
    embedding_approx: tuple
    model: BelyiModel
    expected: PermutationTriple
    expected_group_order: Optional[int] = None

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("degree must be positive")
        if self.expected.degree != self.degree:
            raise InvalidTriple(
                f"declared degree {self.degree} but the triple acts on"
                f" {self.expected.degree} points"
            )
        re_q, im_q = self.embedding_approx
        object.__setattr__(self, "embedding_approx", (mpq(re_q), mpq(im_q)))


@dataclass(frozen=True)
class ParseFailure:
    """Stand-in for an entry that could not be produced.

    kind labels the failing stage, usually "parse"; front ends reuse it
    for fetch failures so batch reports keep an honest error_kind.
    """

    label: str
    message: str
    kind: str = "parse"


# ---------------------------------------------------------- system building


def _as_nf(c, nf: NumberField) -> NFElement:
    if isinstance(c, NFElement):
        if c.field != nf:
            raise DegenerateModel("coefficient from a different number field")
        return c
    return NFElement.from_rational(nf, mpq(c))


def _uni_nf_coeffs(p: MPoly, nf: NumberField) -> list:
    coeffs = [nf.zero() for _ in range(p.deg_in(0) + 1)]
    for (e,), c in p.terms.items():
        coeffs[e] = _as_nf(c, nf)
    return coeffs


def build_system(
    model: BelyiModel, emb: EmbeddingBox, ctx: Ctx
) -> tuple[ParametricSystem, ParametricSystem, str]:
    """Compile a model into (tracked, bootstrap, fiber_mode).

    The tracked system is what loops are tracked on; the bootstrap
    system is solved once to capture the start fiber.  They differ only
    for smooth models, where the bootstrap gains the equation q*z - 1
    excluding the common vanishing locus of numerator and denominator.
    All coefficient arithmetic stays exact in the field; the embedding
    interval is substituted once per equation at the end.
    """
    if isinstance(model, P1Model):
        return _build_p1(model, emb, ctx)
    if isinstance(model, SmoothModel):
        return _build_smooth(model, emb, ctx)
    if isinstance(model, PlaneModel):
        return _build_plane(model, emb, ctx)
    raise TypeError(f"unknown model type {type(model).__name__}")


def _build_p1(model: P1Model, emb: EmbeddingBox, ctx: Ctx):
    p, q = model.num, model.den
    if p.nvars != 1 or q.nvars != 1:
        raise DegenerateModel("p1 model needs univariate numerator and denominator")
    if q.is_zero():
        raise DegenerateModel("denominator is zero")
    if p.is_zero() or max(p.deg_in(0), q.deg_in(0)) < 1:
        raise DegenerateModel("map is constant")
    nf = emb.field
    res = resultant(_uni_nf_coeffs(p, nf), _uni_nf_coeffs(q, nf))
    if res.is_zero():
        raise NotCoprime("numerator and denominator share a root")
    terms = {}
    for (e,), c in p.terms.items():
        terms[(0, e)] = _as_nf(c, nf)
    for (e,), c in q.terms.items():
        terms[(1, e)] = -_as_nf(c, nf)
    tracked = ParametricSystem([substitute_nu(MPoly(2, terms), emb, ctx)], ctx)
    return tracked, tracked, "univariate"


def _build_smooth(model: SmoothModel, emb: EmbeddingBox, ctx: Ctx):
    gs, p, q = list(model.chart_eqs), model.num, model.den
    if q.is_zero():
        raise DegenerateModel("denominator is zero")
    if p.is_zero():
        raise DegenerateModel("map is constant")
    n = p.nvars
    if q.nvars != n or any(g.nvars != n for g in gs):
        raise DegenerateModel("chart equations and map must share one variable set")
    if len(gs) != n - 1:
        raise DegenerateModel(
            f"{n} variables need {n - 1} chart equations, got {len(gs)}"
        )
    if any(g.is_zero() for g in gs):
        raise DegenerateModel("zero chart equation")
    nf = emb.field

    def over_field(f: MPoly) -> MPoly:
        return f.map_coeffs(lambda c: _as_nf(c, nf))

    t = MPoly.var(n + 1, 0)
    p_l, q_l = over_field(p).lift_var(0), over_field(q).lift_var(0)
    tracked_nf = [over_field(g).lift_var(0) for g in gs]
    tracked_nf.append(p_l.sub(t.mul(q_l)))
    z = MPoly.var(n + 2, n + 1)
    boot_nf = [f.lift_var(n + 1) for f in tracked_nf]
    boot_nf.append(z.mul(q_l.lift_var(n + 1)).sub(MPoly.const(n + 2, nf.one())))
    tracked = ParametricSystem([substitute_nu(f, emb, ctx) for f in tracked_nf], ctx)
    boot = ParametricSystem([substitute_nu(f, emb, ctx) for f in boot_nf], ctx)
    return tracked, boot, "multivariate"


def _build_plane(model: PlaneModel, emb: EmbeddingBox, ctx: Ctx):
    f = model.curve
    if f.nvars != 2:
        raise DegenerateModel("plane curve must live in the two variables (t, x)")
    if not (f.uses_var(0) and f.uses_var(1)):
        raise DegenerateModel("plane curve must involve both variables")
    nf = emb.field
    lam = _as_nf(model.lam, nf)
    if lam.is_zero():
        raise DegenerateModel("lambda is zero")
    # t <- lam^-1 t, exactly in the field: coefficient of t^k gains lam^-k
    linv = lam.inv()
    pows = {0: nf.one()}
    terms = {}
    for (k, e), c in f.terms.items():
        if k not in pows:
            pows[k] = linv**k
        terms[(k, e)] = _as_nf(c, nf) * pows[k]
    tracked = ParametricSystem([substitute_nu(MPoly(2, terms), emb, ctx)], ctx)
    return tracked, tracked, "univariate"


# ------------------------------------------------------------------ report


@dataclass
class VerifyReport:
    label: str
    status: str
    error_kind: Optional[str] = None
    error_message: Optional[str] = None
    computed: Optional[PermutationTriple] = None
    group_order: Optional[int] = None
    transitive: Optional[bool] = None
    s3_index: Optional[int] = None
    conjugator: Optional[Permutation] = None
    alpha: Optional[str] = None
    timings: dict = field(default_factory=dict)
    seed: int = 0
    prec: int = 53
    base: tuple = (mpq(1, 2), mpq(0))
    radius: object = mpq(1, 2)
    retries: int = 0

    def ok(self) -> bool:
        return self.status in PASSING_STATUSES

    def status_text(self) -> str:
        if self.status == "ERROR":
            return f"ERROR({self.error_kind})"
        return self.status

    def to_json_obj(self, include_timings: bool = True) -> dict:
        """Plain-data form; deterministic except for the timings."""
        out = {
            "label": self.label,
            "status": self.status,
            "error": None
            if self.error_kind is None
            else {"kind": self.error_kind, "message": self.error_message},
            "computed": None
            if self.computed is None
            else {
                "s0": self.computed.s0.to_cycles(),
                "s1": self.computed.s1.to_cycles(),
                "sinf": self.computed.sinf.to_cycles(),
            },
            "group_order": self.group_order,
            "transitive": self.transitive,
            "s3_index": self.s3_index,
            "conjugator": None if self.conjugator is None else self.conjugator.to_cycles(),
            "alpha": self.alpha,
            "config": {
                "seed": self.seed,
                "prec": self.prec,
                "base": [str(self.base[0]), str(self.base[1])],
                "radius": str(self.radius),
            },
            "retries": self.retries,
        }
        if include_timings:
            out["timings"] = dict(self.timings)
        return out


# ---------------------------------------------------------------- pipeline


@contextmanager
def _phase(timings: dict, name: str):
    t0 = time.perf_counter()
    try:
        yield
    finally:
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - t0


def _alpha_str(emb: EmbeddingBox) -> str:
    a = emb.alpha
    return f"[{a.re.lo}, {a.re.hi}] + [{a.im.lo}, {a.im.hi}]*i"


def compare_triples(computed: PermutationTriple, expected: PermutationTriple):
    """Classify expected against computed: (status, s3_index, conjugator).

    The conjugator transports the matched representative (computed, an
    s3_orbit element, or the orientation flip) onto the expected triple.
    """
    pi = simultaneously_conjugate(computed, expected)
    if pi is not None:
        return "PASS", None, pi
    orbit = s3_orbit(computed)
    for i, cand in enumerate(orbit):
        if i == 0:
            continue
        pi = simultaneously_conjugate(cand, expected)
        if pi is not None:
            return "PASS_UP_TO_S3", i, pi
    pi = simultaneously_conjugate(computed.inverse_reversed(), expected)
    if pi is not None:
        return "PASS_INVERSE", None, pi
    return "FAIL_TRIPLE", None, None


_PHASE_ERRORS = (CertitrackError, ValueError, ArithmeticError)


def verify_entry(
    entry: BelyiEntry,
    cfg: Optional[TrackConfig] = None,
    *,
    seed: int = 0,
    threads: int = 1,
    base=(mpq(1, 2), mpq(0)),
    radius=mpq(1, 2),
    start_fiber=None,
) -> VerifyReport:
    """Run the whole pipeline on one entry.

    Phases: embed, build, fiber, monodromy, compare.  A failure in any
    phase produces status ERROR with that phase as the kind.  Stalls
    trigger the tighten-and-retry ladder instead, up to RETRY_LIMIT
    times.  start_fiber bypasses the solver: it is a list of
    approximate fiber points, certified here before use.
    """
    run_cfg = cfg if cfg is not None else TrackConfig()
    base = (mpq(base[0]), mpq(base[1]))
    radius = mpq(radius)
    timings: dict = {}
    attempt = 0
    alpha = None

    def error(kind: str, exc: BaseException) -> VerifyReport:
        return VerifyReport(
            label=entry.label,
            status="ERROR",
            error_kind=kind,
            error_message=str(exc) or type(exc).__name__,
            alpha=alpha,
            timings=timings,
            seed=seed,
            prec=run_cfg.prec,
            base=base,
            radius=radius,
            retries=attempt,
        )

    while True:
        ctx = Ctx(run_cfg.prec)
        width = mpq(1, 1 << (max(run_cfg.prec // 2, 8) + TIGHTEN_BITS * attempt))
        try:
            with _phase(timings, "embed"):
                emb = embed_root(
                    entry.field, entry.embedding_approx, ctx, target_width=width
                )
            alpha = _alpha_str(emb)
        except _PHASE_ERRORS as exc:
            return error("embedding", exc)
        try:
            with _phase(timings, "build"):
                tracked, boot, mode = build_system(entry.model, emb, ctx)
        except _PHASE_ERRORS as exc:
            return error("build", exc)
        try:
            with _phase(timings, "fiber"):
                if start_fiber is not None:
                    b_iv = ComplexInterval.from_rationals(base[0], base[1], ctx)
                    fib = fiber_from_points(
                        tracked.specialize(b_iv, ctx),
                        start_fiber,
                        entry.degree,
                        ctx,
                        base=base,
                    )
                elif mode == "univariate":
                    b_iv = ComplexInterval.from_rationals(base[0], base[1], ctx)
                    uni = tracked.specialize(b_iv, ctx).polys[0]
                    fib = univariate_fiber(uni, entry.degree, ctx, base=base, seed=seed)
                else:
                    fib = bootstrap_fiber(
                        boot,
                        base,
                        entry.degree,
                        seed=seed,
                        ctx=ctx,
                        cfg=run_cfg,
                        reduced=tracked,
                    )
        except Stalled as exc:
            if attempt >= RETRY_LIMIT:
                return error("fiber", exc)
            attempt += 1
            run_cfg = _escalated(run_cfg)
            continue
        except _PHASE_ERRORS as exc:
            return error("fiber", exc)
        try:
            with _phase(timings, "monodromy"):
                trip = monodromy_triple(
                    tracked, fib, run_cfg, threads=threads, radius=radius
                )
        except Stalled as exc:
            if attempt >= RETRY_LIMIT:
                return error("monodromy", exc)
            attempt += 1
            run_cfg = _escalated(run_cfg)
            continue
        except _PHASE_ERRORS as exc:
            return error("monodromy", exc)
        break

    with _phase(timings, "compare"):
        order = trip.group_order()
        transitive = trip.is_transitive()
        status, s3_index, conjugator = compare_triples(trip, entry.expected)
    return VerifyReport(
        label=entry.label,
        status=status,
        computed=trip,
        group_order=order,
        transitive=transitive,
        s3_index=s3_index,
        conjugator=conjugator,
        alpha=alpha,
        timings=timings,
        seed=seed,
        prec=run_cfg.prec,
        base=base,
        radius=radius,
        retries=attempt,
    )


def _escalated(cfg: TrackConfig) -> TrackConfig:
    prec = cfg.prec * 2
    return dataclasses.replace(cfg, prec=prec, max_prec=max(cfg.max_prec, prec))


def verify_batch(
    entries,
    cfg: Optional[TrackConfig] = None,
    *,
    seed: int = 0,
    threads: int = 1,
    base=(mpq(1, 2), mpq(0)),
    radius=mpq(1, 2),
) -> tuple[list, dict]:
    """Verify a list of entries; ParseFailure items become ERROR(parse).

    Parallelism moves to the entry level: with several entries each one
    tracks single-threaded, so results never depend on scheduling.
    Returns (reports, summary) with summary counting report statuses.
    """
    items = list(entries)
    inner = threads if len(items) <= 1 else 1
    prec_echo = (cfg or TrackConfig()).prec

    def run(item) -> VerifyReport:
        if isinstance(item, ParseFailure):
            return VerifyReport(
                label=item.label,
                status="ERROR",
                error_kind=item.kind,
                error_message=item.message,
                seed=seed,
                prec=prec_echo,
                base=(mpq(base[0]), mpq(base[1])),
                radius=mpq(radius),
            )
        return verify_entry(
            item, cfg, seed=seed, threads=inner, base=base, radius=radius
        )

    workers = min(threads, len(items)) if items else 0
    if workers <= 1:
        reports = [run(item) for item in items]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(run, items))
    summary: dict = {}
    for r in reports:
        key = r.status_text()
        summary[key] = summary.get(key, 0) + 1
    return reports, summary
