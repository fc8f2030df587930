"""lambda -> m_lambda along a ladder, audit of its monotonicity/continuity, and lambda* estimation."""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .coefficients import CoefficientProfile, ProblemParams, ValidationError
from .ground_state import (EscapeDiagnosis, GroundStateResult, SolverOptions, cached_limit,
                           detect_escape, discretization_budget, minimize, reference_level,
                           scan_initial)

WORKERS_ENV = "NEHARI_WORKERS"


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValidationError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}")
    if n < 1:
        raise ValidationError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}")
    return n


def eps_mono(m_inf: float) -> float:
    return 1e-6 * abs(m_inf)


@dataclass
class SweepEntry:
    lam: float
    m: float
    converged: bool
    iterations: int
    boundary_mass: float
    escape: EscapeDiagnosis
    levels: tuple                  # one per ladder grid, smallest box first
    source: str                    # cold | warm | repair
    results: list = field(default_factory=list, repr=False)

    @property
    def u(self):
        return self.results[-1].u


@dataclass
class SweepContext:
    params: ProblemParams
    a: CoefficientProfile
    b: CoefficientProfile
    ladder: tuple
    opts: SolverOptions
    refs: tuple                    # same-grid m_inf per ladder grid
    delta_h: float
    escape_delta: float


@dataclass
class LambdaStar:
    kind: str                      # bracket | not_observed
    lo: float
    hi: float
    estimate: float
    lambda_max: float
    persistent: bool
    evaluations: int = 0

    @property
    def finite(self) -> bool:
        return self.kind == "bracket"

    def to_dict(self) -> dict:
        if self.kind == "not_observed":
            return {"kind": "not_observed_up_to", "lambda_max": self.lambda_max}
        return {"kind": "bracket", "lo": self.lo, "hi": self.hi, "estimate": self.estimate,
                "persistent": self.persistent, "evaluations": self.evaluations}

    def __str__(self):
        if self.kind == "not_observed":
            return f"not_observed_up_to({self.lambda_max:g})"
        return f"lambda* in [{self.lo:.6g}, {self.hi:.6g}]"


@dataclass
class SweepResult:
    lambdas: np.ndarray
    m_values: np.ndarray
    m_inf: float
    lambda_star: LambdaStar | None
    monotone_ok: bool
    max_backward_jump: float
    continuity_modulus: float
    escape_flags: list
    entries: list = field(repr=False, default_factory=list)
    context: SweepContext | None = field(repr=False, default=None)

    @property
    def delta_h(self) -> float:
        return self.context.delta_h if self.context else math.nan

    def rows(self) -> list:
        return [(e.lam, e.m, e.escape.label, e.boundary_mass, e.iterations) for e in self.entries]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["lambda", "m_lambda", "escape_flag", "boundary_mass", "iterations"])
            for lam, m, flag, bm, it in self.rows():
                w.writerow([repr(float(lam)), repr(float(m)), flag, repr(float(bm)), it])

    def summary(self) -> dict:
        return {
            "lambdas": [float(x) for x in self.lambdas],
            "m_values": [float(x) for x in self.m_values],
            "m_inf": self.m_inf,
            "delta_h": self.delta_h,
            "lambda_star": self.lambda_star.to_dict() if self.lambda_star else None,
            "monotone_ok": self.monotone_ok,
            "max_backward_jump": self.max_backward_jump,
            "continuity_modulus": self.continuity_modulus,
            "escape_flags": [e.label for e in self.escape_flags],
            "converged": [bool(e.converged) for e in self.entries],
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)


def _cold(args):
    params, a, b, grid, opts = args
    init = scan_initial(params, a, b, grid)
    return minimize(params, a, b, grid, replace(opts, init=init))


def _better(r1: GroundStateResult | None, r2: GroundStateResult | None) -> GroundStateResult:
    if r1 is None:
        return r2
    if r2 is None:
        return r1
    if r1.converged != r2.converged:
        return r1 if r1.converged else r2
    return r1 if r1.m <= r2.m else r2


def make_context(params, a, b, ladder, opts: SolverOptions, escape_delta: float | None = None) -> SweepContext:
    ladder = tuple(sorted(ladder, key=lambda g: g.r_max if g.kind == "radial" else g.half_width))
    base = params.with_lambda(0.0)
    refs = tuple(reference_level(base, g, opts) for g in ladder)
    dh = discretization_budget(base, ladder[-1], opts)
    if escape_delta is None:
        escape_delta = 3 * dh
    return SweepContext(params, a, b, ladder, opts, refs, dh, escape_delta)


def solve_entry(ctx: SweepContext, lam: float, warm: Sequence | None = None,
                cold: Sequence | None = None) -> SweepEntry:
    """Best of the cold (scanned) and warm starts on every ladder grid."""
    P = ctx.params.with_lambda(float(lam))
    per_grid = []
    src = "cold"
    for i, g in enumerate(ctx.ladder):
        rc = cold[i] if cold is not None else _cold((P, ctx.a, ctx.b, g, ctx.opts))
        rw = None
        if warm is not None and warm[i] is not None:
            rw = minimize(P, ctx.a, ctx.b, g, ctx.opts, u0=warm[i])
        best = _better(rc, rw)
        if i == len(ctx.ladder) - 1 and best is rw:
            src = "warm"
        per_grid.append(best)
    return _entry(ctx, float(lam), per_grid, src)


def _entry(ctx, lam, per_grid, src) -> SweepEntry:
    top = per_grid[-1]
    esc = detect_escape(per_grid, ctx.refs[-1], ctx.escape_delta)
    return SweepEntry(lam, top.m, all(r.converged for r in per_grid), top.iterations, top.boundary_mass,
                      esc, tuple(r.m for r in per_grid), src, per_grid)


def lambda_sweep(params: ProblemParams, a: CoefficientProfile, b: CoefficientProfile,
                 lambdas: Sequence[float], ladder: Sequence, opts: SolverOptions = SolverOptions(),
                 workers: int | None = None, escape_delta: float | None = None,
                 repair: bool = True) -> SweepResult:
    """m_lambda on the largest ladder grid, with escape flags from the whole ladder.

    Cold starts (scanned translated solitons) are independent and may run
    in a process pool; the warm-start pass then runs in lambda order, and a
    backward pass re-solves lambda_i from the lambda_{i+1} minimizer
    whenever the level went down (I_{lambda_i} <= I_{lambda_{i+1}} pointwise,
    so that start is admissible and only lowers m_{lambda_i}).
    """
    lams = [float(x) for x in lambdas]
    if len(lams) < 2:
        raise ValidationError("a sweep needs at least two lambda values")
    if any(l2 <= l1 for l1, l2 in zip(lams, lams[1:])):
        raise ValidationError("lambdas must be strictly increasing")
    if lams[0] < 0:
        raise ValidationError("lambda must be nonnegative")
    if any(g.kind != "box" for g in ladder):
        raise ValidationError("lambda sweeps run on box ladders (radial grids only see m_lambda,r)")
    if len(ladder) < 2:
        raise ValidationError("escape flags need a ladder of at least two box sizes")
    ctx = make_context(params, a, b, ladder, opts, escape_delta)
    workers = worker_count() if workers is None else workers
    tasks = [(params.with_lambda(l), a, b, g, opts) for l in lams for g in ctx.ladder]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            colds = list(ex.map(_cold, tasks))
    else:
        colds = [_cold(t) for t in tasks]
    k = len(ctx.ladder)
    entries: list[SweepEntry] = []
    warm = None
    for i, lam in enumerate(lams):
        e = solve_entry(ctx, lam, warm, colds[i * k:(i + 1) * k])
        entries.append(e)
        warm = [r.u for r in e.results]
    if repair:
        tol = eps_mono(ctx.refs[-1])
        for i in range(len(entries) - 2, -1, -1):
            if any(entries[i].levels[j] > entries[i + 1].levels[j] + tol for j in range(k)):
                P = params.with_lambda(entries[i].lam)
                per = []
                for j, g in enumerate(ctx.ladder):
                    r = minimize(P, a, b, g, opts, u0=entries[i + 1].results[j].u)
                    per.append(_better(entries[i].results[j], r))
                entries[i] = _entry(ctx, entries[i].lam, per, "repair")
    return assemble(ctx, entries)


def assemble(ctx: SweepContext, entries: list, lambda_star: LambdaStar | None = None) -> SweepResult:
    lams = np.array([e.lam for e in entries])
    ms = np.array([e.m for e in entries])
    d = np.diff(ms)
    back = float(max(0.0, -d.min())) if d.size else 0.0
    return SweepResult(
        lambdas=lams, m_values=ms, m_inf=ctx.refs[-1], lambda_star=lambda_star,
        monotone_ok=back <= eps_mono(ctx.refs[-1]), max_backward_jump=back,
        continuity_modulus=float(np.abs(d).max()) if d.size else 0.0,
        escape_flags=[e.escape for e in entries], entries=entries, context=ctx,
    )


def _triggered(e: SweepEntry, m_inf: float, delta: float) -> bool:
    return e.converged and e.m >= m_inf - delta and e.escape.label == "escaping"


def _nearest(entries, lam):
    below = [e for e in entries if e.lam <= lam]
    above = [e for e in entries if e.lam >= lam]
    return (below[-1] if below else None), (above[0] if above else None)


def estimate_lambda_star(sweep: SweepResult, delta: float, rel_width: float = 0.01,
                         refine: bool = True) -> LambdaStar:
    """Smallest lambda with saturated level and escaping flag, persisting at twice that lambda.

    The bracket between the last untriggered and the first triggered lambda
    is bisected geometrically until its relative width drops below rel_width.
    Unconverged entries count as missing.
    """
    ctx = sweep.context
    if ctx is None:
        raise ValidationError("sweep has no solver context")
    if not delta > ctx.delta_h:
        raise ValidationError(f"delta = {delta:g} does not exceed the discretization budget {ctx.delta_h:g}")
    m_inf = sweep.m_inf
    entries = sorted(sweep.entries, key=lambda e: e.lam)
    cache = {e.lam: e for e in entries}
    evals = 0

    def at(lam):
        nonlocal evals
        if lam in cache:
            return cache[lam]
        lo_e, hi_e = _nearest(sorted(cache.values(), key=lambda e: e.lam), lam)
        warm_src = lo_e if lo_e is not None else hi_e
        e = solve_entry(ctx, lam, [r.u for r in warm_src.results])
        if hi_e is not None:
            # a higher-lambda minimizer is an admissible start at lower lambda
            per = [_better(r, minimize(ctx.params.with_lambda(lam), ctx.a, ctx.b, g, ctx.opts, u0=rh.u))
                   for r, rh, g in zip(e.results, hi_e.results, ctx.ladder)]
            e = _entry(ctx, lam, per, e.source)
        evals += 1
        cache[lam] = e
        return e

    lam_max = entries[-1].lam
    prev_lam = None
    for e in entries:
        if not e.converged:
            continue
        if _triggered(e, m_inf, delta):
            if not refine:
                return LambdaStar("bracket", prev_lam if prev_lam is not None else 0.0, e.lam, e.lam,
                                  lam_max, True, evals)
            if not _triggered(at(2 * e.lam), m_inf, delta):
                prev_lam = e.lam
                continue
            lo = prev_lam if prev_lam is not None else 0.0
            hi = e.lam
            while (hi - lo) > rel_width * hi:
                mid = math.sqrt(lo * hi) if lo > 0 else 0.5 * hi
                em = at(mid)
                if not em.converged:
                    # treat as missing: shrink from above conservatively
                    lo = mid
                    continue
                if _triggered(em, m_inf, delta):
                    hi = mid
                else:
                    lo = mid
            return LambdaStar("bracket", lo, hi, math.sqrt(lo * hi) if lo > 0 else hi, lam_max, True, evals)
        prev_lam = e.lam
    return LambdaStar("not_observed", math.nan, math.nan, math.inf, lam_max, False, evals)


@dataclass
class AuditReport:
    violations: list
    continuity_modulus: float
    max_spacing: float
    lambda_star_positive: bool | None
    eps_mono: float

    @property
    def ok(self) -> bool:
        return not self.violations and self.lambda_star_positive is not False

    def to_dict(self) -> dict:
        return {"violations": self.violations, "continuity_modulus": self.continuity_modulus,
                "max_spacing": self.max_spacing, "lambda_star_positive": self.lambda_star_positive,
                "eps_mono": self.eps_mono, "ok": self.ok}


def audit_map_properties(sweep: SweepResult) -> AuditReport:
    if len(sweep.lambdas) < 3:
        raise ValidationError("the audit needs at least three lambda values")
    tol = eps_mono(sweep.m_inf)
    viol = [(float(sweep.lambdas[i]), float(sweep.lambdas[i + 1]), float(sweep.m_values[i] - sweep.m_values[i + 1]))
            for i in range(len(sweep.lambdas) - 1) if sweep.m_values[i + 1] < sweep.m_values[i] - tol]
    ls = sweep.lambda_star
    pos = None if ls is None else (ls.kind == "not_observed" or ls.lo > 0 or ls.hi > 0)
    return AuditReport(viol, sweep.continuity_modulus, float(np.diff(sweep.lambdas).max()), pos, tol)


def continuity_refinement(params: ProblemParams, a: CoefficientProfile, b: CoefficientProfile,
                          lam_lo: float, lam_hi: float, n: int, grid, opts: SolverOptions = SolverOptions()):
    """Continuity modulus of uniform lambda ladders with n and 2n - 1 points on one grid."""
    mods = []
    for k in (n, 2 * n - 1):
        lams = np.linspace(lam_lo, lam_hi, k)
        ms = []
        prev = None
        for lam in lams:
            r = minimize(params.with_lambda(float(lam)), a, b, grid, opts, u0=prev)
            prev = r.u
            ms.append(r.m)
        mods.append(float(np.abs(np.diff(ms)).max()))
    return tuple(mods)


def richardson_budget(params: ProblemParams, grid, opts: SolverOptions = SolverOptions()) -> float:
    return discretization_budget(params.with_lambda(0.0), grid, opts)
