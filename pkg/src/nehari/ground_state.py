"""Nehari-manifold minimization by projected, preconditioned gradient descent."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from .asymptotics import FitError, decay_fit
from .coefficients import CoefficientProfile, ProblemParams
from .energy import (ZERO, DegenerateField, breakdown, coefficient_values, gradient_values,
                     reduced_energy_from)
from .grids import Field, h1_norm_sq
from .limit_problem import LimitGroundState, default_radial_grid, solve_limit


class NumericalBlowup(RuntimeError):
    pass


@dataclass(frozen=True)
class Init:
    """Initial guess: 'soliton', 'soliton_at' (center) or 'gaussian' (center, width)."""

    kind: str = "soliton"
    center: tuple = ()
    width: float = 1.0

    def __post_init__(self):
        if self.kind not in ("soliton", "soliton_at", "gaussian"):
            raise ValueError(f"unknown init kind {self.kind!r}")

    @classmethod
    def soliton_at(cls, y) -> "Init":
        return cls("soliton_at", tuple(float(c) for c in y))

    @classmethod
    def gaussian(cls, center, width: float) -> "Init":
        return cls("gaussian", tuple(float(c) for c in center), float(width))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "center": list(self.center), "width": self.width}

    @classmethod
    def from_dict(cls, d) -> "Init":
        if isinstance(d, str):
            return cls(d)
        return cls(d.get("kind", "soliton"), tuple(d.get("center", ())), float(d.get("width", 1.0)))


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 3000
    step: float = 1.0
    max_step: float = 4.0
    armijo_factor: float = 0.5
    armijo_c: float = 1e-4
    max_halvings: int = 40
    tol_grad: float = 1e-7
    positivity: bool = True
    init: Init = field(default_factory=Init)
    method: str = "lbfgs"        # 'sd' (preconditioned steepest descent) or 'lbfgs'
    memory: int = 10

    def __post_init__(self):
        if self.method not in ("sd", "lbfgs"):
            raise ValueError("method must be 'sd' or 'lbfgs'")
        if not self.tol_grad > 0 or not self.step > 0:
            raise ValueError("tol_grad and step must be positive")
        if not 0 < self.armijo_factor < 1:
            raise ValueError("armijo_factor must lie in (0, 1)")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("max_iters", "step", "max_step", "armijo_factor", "armijo_c",
                                           "max_halvings", "tol_grad", "positivity", "method", "memory")}
        d["init"] = self.init.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SolverOptions":
        d = dict(d)
        if "init" in d:
            d["init"] = Init.from_dict(d["init"])
        return cls(**d)


@dataclass
class GroundStateResult:
    u: Field
    m: float
    grad_norm: float
    pde_residual: float
    iterations: int
    converged: bool
    status: str
    barycenter: tuple
    boundary_mass: float
    decay_rate_fit: float
    lam: float
    energies: list = field(default_factory=list, repr=False)
    trace: list = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        return {
            "lambda": self.lam, "m": self.m, "grad_norm": self.grad_norm,
            "pde_residual": self.pde_residual, "iterations": self.iterations,
            "converged": self.converged, "status": self.status,
            "barycenter": list(self.barycenter), "boundary_mass": self.boundary_mass,
            "decay_rate_fit": self.decay_rate_fit, "grid": self.u.grid.describe(),
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)

    def trace_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iter", "energy", "grad_norm", "barycenter_norm", "boundary_mass"])
            for row in self.trace:
                w.writerow([row[0], *(repr(float(x)) for x in row[1:])])


@lru_cache(maxsize=16)
def cached_limit(params: ProblemParams) -> LimitGroundState:
    base = ProblemParams(params.N, params.p, params.a_inf, params.b_inf, 0.0)
    sa = math.sqrt(params.a_inf)
    return solve_limit(base, default_radial_grid(base, h=0.005, r_max=60.0 / sa))


def initial_field(grid, opts_init: Init, limit: LimitGroundState) -> Field:
    if opts_init.kind == "soliton":
        return limit.sample(grid)
    if opts_init.kind == "soliton_at":
        return limit.sample(grid, opts_init.center)
    c = np.asarray(opts_init.center if opts_init.center else (0.0,) * grid.N, float)
    if grid.kind == "radial":
        # on a radial grid the center is a shell radius
        r0 = float(c[0]) if c.size else 0.0
        vals = np.exp(-((grid.nodes - r0) / opts_init.width) ** 2)
    else:
        vals = np.exp(-sum((x - ci) ** 2 for x, ci in zip(grid.mesh, c)) / opts_init.width ** 2)
    return Field(grid, vals * grid.free)


def boundary_mass(u: Field, frac: float = 0.9) -> float:
    g = u.grid
    m2 = g.weights * u.values ** 2
    tot = float(m2.sum())
    return float(m2[g.shell_mask(frac)].sum()) / tot if tot > 0 else 0.0


def pde_residual(u: Field, params: ProblemParams, a: CoefficientProfile = ZERO,
                 b: CoefficientProfile = ZERO) -> float:
    """Weighted L2 norm of the strong residual, relative to the H1 norm of u."""
    if u.is_zero():
        raise DegenerateField("residual relative to the zero field is undefined")
    g = u.grid
    r = gradient_values(u.values, g, params, coefficient_values(a, g), coefficient_values(b, g))
    return float(np.sqrt(np.sum(g.weights * r * r))) / math.sqrt(h1_norm_sq(u, params.a_inf))


def _barycenter_or_origin(u: Field):
    if u.grid.kind == "radial":
        return (0.0,) * u.grid.N
    from .topology import barycenter
    try:
        return tuple(float(x) for x in barycenter(u).beta)
    except Exception:
        return (math.nan,) * u.grid.N


# penalty(values) -> (value, unweighted gradient array); used for constrained variants
Penalty = Callable[[np.ndarray], tuple]


def minimize(params: ProblemParams, a: CoefficientProfile, b: CoefficientProfile, grid,
             opts: SolverOptions = SolverOptions(), limit: LimitGroundState | None = None,
             u0: Field | None = None, penalty: Optional[Penalty] = None,
             record_trace: bool = False) -> GroundStateResult:
    """Minimize I_lambda over the discrete Nehari set.

    Each step moves against the gradient measured in the q_lambda metric
    (a Sobolev gradient) and rescales back onto the constraint with the
    closed-form projection; the step is chosen by Armijo backtracking on
    the projected energy.
    """
    if limit is None:
        limit = cached_limit(params)
    av = coefficient_values(a, grid)
    bv = coefficient_values(b, grid)
    w = grid.weights
    p = params.p
    metric = grid.metric_solver(params.a_inf + params.lam * av)

    def evaluate(vals):
        e = breakdown(Field(grid, vals), params, a, b)
        t = (e.q_lambda / e.b_total) ** (1.0 / (p - 1))
        J = reduced_energy_from(e, p)
        P = penalty(vals * t)[0] if penalty is not None else 0.0
        return t, J, P, e

    u = (u0 if u0 is not None else initial_field(grid, opts.init, limit)).values.copy()
    u[~grid.free] = 0.0
    if opts.positivity:
        u = np.abs(u)
    if not np.any(u):
        raise DegenerateField("initial guess vanishes")
    t, J, P, e = evaluate(u)
    u *= t
    cap = 1e6 * limit.peak
    energies = [J]
    trace = []
    step = opts.step
    status = "max_iters"
    gnorm = math.inf
    k = 0
    lbfgs = opts.method == "lbfgs"
    mem: list = []
    g_next = None
    for k in range(opts.max_iters + 1):
        if g_next is not None:
            g = g_next
        else:
            g = gradient_values(u, grid, params, av, bv)
            if penalty is not None:
                g = g + penalty(u)[1] / w * grid.free
        g_next = None
        unorm = math.sqrt(h1_norm_sq(Field(grid, u), params.a_inf))
        gnorm = float(np.sqrt(np.sum(w * g * g))) / unorm
        if record_trace:
            trace.append((k, J + P, gnorm, 0.0, boundary_mass(Field(grid, u))))
        if gnorm <= opts.tol_grad:
            status = "converged"
            break
        if k == opts.max_iters:
            break
        d = metric.solve(g)
        if lbfgs and mem:
            # two-loop recursion in the quadrature inner product, H0 = metric inverse
            q = g.copy()
            alphas = []
            for s_i, y_i, r_i in reversed(mem):
                al = r_i * float(np.sum(w * s_i * q))
                alphas.append(al)
                q -= al * y_i
            s_l, y_l, _ = mem[-1]
            hy = metric.solve(y_l)
            gamma = float(np.sum(w * s_l * y_l)) / float(np.sum(w * y_l * hy))
            d = gamma * metric.solve(q)
            for (s_i, y_i, r_i), al in zip(mem, reversed(alphas)):
                be = r_i * float(np.sum(w * y_i * d))
                d += (al - be) * s_i
            if not float(np.sum(w * g * d)) > 0:
                mem.clear()
                d = metric.solve(g)
        slope = float(np.sum(w * g * d))
        if not math.isfinite(slope):
            raise NumericalBlowup("non-finite gradient encountered")
        eta = 1.0 if (lbfgs and mem) else step
        for _ in range(opts.max_halvings):
            trial = u - eta * d
            if opts.positivity:
                trial = np.abs(trial)
            if np.any(trial):
                tt, Jt, Pt, et = evaluate(trial)
                if math.isfinite(Jt) and Jt + Pt <= J + P - opts.armijo_c * eta * slope:
                    break
            eta *= opts.armijo_factor
        else:
            if lbfgs and mem:
                mem.clear()
                continue
            status = "stall"
            break
        new = trial * tt
        if not np.all(np.isfinite(new)) or np.max(np.abs(new)) > cap:
            raise NumericalBlowup(f"iterate exceeded {cap:.3g} (1e6 x soliton peak)")
        if lbfgs:
            g_new = gradient_values(new, grid, params, av, bv)
            if penalty is not None:
                g_new = g_new + penalty(new)[1] / w * grid.free
            s_k, y_k = new - u, g_new - g
            sy = float(np.sum(w * s_k * y_k))
            if sy > 1e-14 * float(np.sum(w * s_k * s_k)) ** 0.5 * float(np.sum(w * y_k * y_k)) ** 0.5 and sy > 0:
                mem.append((s_k, y_k, 1.0 / sy))
                if len(mem) > opts.memory:
                    mem.pop(0)
            g_next = g_new
        u = new
        t, J, P, e = 1.0, Jt, Pt, et
        energies.append(J + P)
        step = min(eta * 2.0, opts.max_step)
    uf = Field(grid, u)
    if grid.kind == "radial":
        try:
            rate = decay_fit(uf, params.a_inf).rate
        except FitError:
            rate = math.nan
    else:
        rate = math.nan
    return GroundStateResult(
        u=uf, m=J, grad_norm=gnorm, pde_residual=pde_residual(uf, params, a, b),
        iterations=k, converged=status == "converged", status=status,
        barycenter=_barycenter_or_origin(uf), boundary_mass=boundary_mass(uf),
        decay_rate_fit=rate, lam=params.lam, energies=energies, trace=trace,
    )


def reference_level(params: ProblemParams, grid, opts: SolverOptions = SolverOptions()) -> float:
    """m_inf as seen by this grid: the zero-coefficient minimum with a centred soliton start."""
    base = params.with_lambda(0.0)
    return _reference_level(base, grid, opts.tol_grad)


@lru_cache(maxsize=32)
def _reference_level(params: ProblemParams, grid, tol: float) -> float:
    r = minimize(params, ZERO, ZERO, grid, SolverOptions(tol_grad=tol))
    return r.m


def refine(grid):
    """Same extent, half the spacing."""
    if grid.kind == "radial":
        return type(grid)(grid.N, grid.r_max, 2 * grid.m - 1)
    return type(grid)(grid.N, grid.half_width, 2 * grid.n - 1, grid.center)


def discretization_budget(params: ProblemParams, grid, opts: SolverOptions = SolverOptions()) -> float:
    """delta_h = |m_inf(h) - m_inf(h/2)| on grids with the same extent."""
    return abs(reference_level(params, grid, opts) - reference_level(params, refine(grid), opts))


@dataclass(frozen=True)
class EscapeDiagnosis:
    label: str           # localized | escaping | inconclusive
    boundary_mass: float
    levels: tuple
    sizes: tuple
    extrapolated: float
    reason: str

    def to_dict(self) -> dict:
        return {"label": self.label, "boundary_mass": self.boundary_mass, "levels": list(self.levels),
                "sizes": list(self.sizes), "extrapolated": self.extrapolated, "reason": self.reason}


def _extent(grid) -> float:
    return grid.r_max if grid.kind == "radial" else grid.half_width


def extrapolate_levels(levels: Sequence[float]) -> float:
    """Geometric (Aitken) extrapolation of the last three levels, else the last level."""
    if len(levels) >= 3:
        x0, x1, x2 = levels[-3:]
        den = x2 - 2 * x1 + x0
        if den != 0 and (x2 - x1) * (x1 - x0) > 0:
            return x2 - (x2 - x1) ** 2 / den
    return levels[-1]


def detect_escape(results: Sequence[GroundStateResult], m_inf: float, delta: float,
                  mass_hi: float = 0.1, mass_lo: float = 1e-3) -> EscapeDiagnosis:
    """Classify a box-size ladder of solves as localized, escaping or inconclusive.

    Truncation only raises the level (smaller domains carry fewer test
    functions), so an escaping family shows levels that decrease towards
    m_inf as the box grows, or mass piling up in the outer shell.
    """
    rs = sorted(results, key=lambda r: _extent(r.u.grid))
    sizes = tuple(_extent(r.u.grid) for r in rs)
    levels = tuple(r.m for r in rs)
    bm = rs[-1].boundary_mass if rs else math.nan
    if len(rs) < 2:
        return EscapeDiagnosis("inconclusive", bm, levels, sizes, levels[-1] if levels else math.nan,
                               "need at least two box sizes")
    ext = extrapolate_levels(levels)
    if bm > mass_hi:
        return EscapeDiagnosis("escaping", bm, levels, sizes, ext, "outer-shell mass above threshold")
    tol = 1e-6 * abs(m_inf)
    nonincreasing = all(l2 <= l1 + tol for l1, l2 in zip(levels, levels[1:]))
    drop = levels[0] - levels[-1]
    if nonincreasing and drop > tol and abs(ext - m_inf) <= delta and levels[-1] >= m_inf - delta:
        return EscapeDiagnosis("escaping", bm, levels, sizes, ext, "levels decrease towards m_inf")
    stable = max(levels) - min(levels) <= delta
    if bm < mass_lo and stable:
        return EscapeDiagnosis("localized", bm, levels, sizes, ext, "level stable, no shell mass")
    return EscapeDiagnosis("inconclusive", bm, levels, sizes, ext, "mixed evidence")


def candidate_centers(grid, fractions=(0.15, 0.3, 0.5, 0.7, 0.8, 0.85)) -> list:
    """Origin plus points along the first axis and the main diagonal (box grids only)."""
    N = grid.N
    out = [(0.0,) * N]
    if grid.kind == "radial":
        return out
    L = grid.half_width
    c = np.array(grid.center)
    for f in fractions:
        out.append(tuple(c + np.eye(N)[0] * f * L))
        if N > 1:
            out.append(tuple(c + np.ones(N) * f * L))
    return out


def scan_initial(params: ProblemParams, a: CoefficientProfile, b: CoefficientProfile, grid,
                 limit: LimitGroundState | None = None, centers=None) -> Init:
    """Translated soliton with the lowest projected energy among the candidate centers."""
    from .energy import reduced_energy
    limit = cached_limit(params) if limit is None else limit
    best = None
    for y in (candidate_centers(grid) if centers is None else centers):
        e = reduced_energy(limit.sample(grid, None if grid.kind == "radial" else y), params, a, b)
        if best is None or e < best[0] - 1e-14:
            best = (e, y)
    return Init("soliton") if not any(best[1]) else Init.soliton_at(best[1])
