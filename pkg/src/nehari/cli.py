"""Command line front end: JSON config in, CSV/JSON tables and a manifest out.

    nehari {limit,solve,sweep,diagnose,hypotheses,verify} CONFIG [--out DIR] [--json]

Exit codes: 0 ok, 1 validation error, 2 solver non-convergence,
3 invariant violation.  NEHARI_WORKERS sets the worker-pool size.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .coefficients import CoefficientProfile, ProblemParams, ValidationError, classify_hypotheses
from .grids import BoxGrid, RadialGrid

EXIT_OK, EXIT_VALIDATION, EXIT_NONCONVERGED, EXIT_INVARIANT = 0, 1, 2, 3


class NonConvergence(RuntimeError):
    pass


class InvariantViolation(RuntimeError):
    pass


# ---------------------------------------------------------------- config

@dataclass
class GridConfig:
    kind: str = "radial"                  # radial | box
    extent: float = 30.0                  # r_max (radial) or half width L (box), length units
    h: float = 0.02
    ladder: tuple = ()                    # extra extents for escape ladders

    def __post_init__(self):
        if self.kind not in ("radial", "box"):
            raise ValidationError(f"grid.kind must be 'radial' or 'box', got {self.kind!r}")
        if not self.extent > 0 or not self.h > 0:
            raise ValidationError("grid.extent and grid.h must be positive")
        if self.h >= self.extent / 2:
            raise ValidationError("grid.h is too coarse for the extent")
        self.ladder = tuple(float(x) for x in self.ladder)
        if any(not x > 0 for x in self.ladder):
            raise ValidationError("grid.ladder extents must be positive")

    def make(self, N: int, extent: float | None = None):
        e = self.extent if extent is None else extent
        if self.kind == "radial":
            return RadialGrid.from_spacing(N, e, self.h)
        return BoxGrid.from_spacing(N, e, self.h)

    def grids(self, N: int) -> list:
        ext = sorted(set(self.ladder) | {self.extent})
        return [self.make(N, e) for e in ext]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "extent": self.extent, "h": self.h, "ladder": list(self.ladder)}


@dataclass
class SweepConfig:
    lambdas: tuple = (0.0, 1.0, 10.0, 100.0, 1000.0)
    delta: float | None = None            # defaults to 3 delta_h
    refine: bool = True

    def __post_init__(self):
        self.lambdas = tuple(float(x) for x in self.lambdas)

    def to_dict(self) -> dict:
        return {"lambdas": list(self.lambdas), "delta": self.delta, "refine": self.refine}


@dataclass
class DiagnosticsConfig:
    rho: tuple = (3.0, 4.0, 5.0, 6.0)
    y: tuple = ()                         # translated-bump probe points
    resolution: int = 16
    surface_h: float = 0.2
    b0_half_width: float = 12.0
    overlap: dict | None = None           # {"g", "h", "alpha", "b_exp", "gamma", "rho"}; None skips

    def __post_init__(self):
        self.rho = tuple(float(r) for r in self.rho)
        self.y = tuple(tuple(float(c) for c in p) for p in self.y)
        if self.overlap is not None:
            o = dict(self.overlap)
            missing = {"g", "h", "alpha", "rho"} - set(o)
            if missing:
                raise ValidationError(f"diagnostics.overlap is missing {sorted(missing)}")
            o["g"] = CoefficientProfile.from_dict(o["g"])
            o["h"] = CoefficientProfile.from_dict(o["h"])
            o["rho"] = tuple(float(r) for r in o["rho"])
            o["alpha"] = float(o["alpha"])
            o["b_exp"] = float(o.get("b_exp", 0.0))
            o["gamma"] = float(o.get("gamma", 1.0))
            self.overlap = o
        if self.resolution < 8:
            raise ValidationError("diagnostics.resolution must be at least 8")
        if any(not r > 0 for r in self.rho):
            raise ValidationError("diagnostics.rho values must be positive")

    def to_dict(self) -> dict:
        return {"rho": list(self.rho), "y": [list(p) for p in self.y], "resolution": self.resolution,
                "surface_h": self.surface_h, "b0_half_width": self.b0_half_width,
                "overlap": None if self.overlap is None else {
                    **self.overlap, "g": self.overlap["g"].to_dict(), "h": self.overlap["h"].to_dict(),
                    "rho": list(self.overlap["rho"])}}


@dataclass
class RunConfig:
    problem: ProblemParams
    a: CoefficientProfile
    b: CoefficientProfile
    sigma: float
    grid: GridConfig
    solver: "object"
    sweep: SweepConfig
    diagnostics: DiagnosticsConfig
    output: str = "out"
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        from .ground_state import SolverOptions
        if not isinstance(d, dict):
            raise ValidationError("config must be a JSON object")
        known = {"problem", "coefficients", "grid", "solver", "sweep", "diagnostics", "output", "seed"}
        extra = set(d) - known
        if extra:
            raise ValidationError(f"unknown config keys: {sorted(extra)}")
        if "problem" not in d:
            raise ValidationError("config needs a 'problem' section")
        try:
            problem = ProblemParams.from_dict(d["problem"])
            co = d.get("coefficients", {})
            a = CoefficientProfile.from_dict(co.get("a", {"family": "zero"}))
            b = CoefficientProfile.from_dict(co.get("b", {"family": "zero"}))
            sigma = float(co.get("sigma", 0.81 * problem.a_inf))
            grid = GridConfig(**d.get("grid", {}))
            solver = SolverOptions.from_dict(d.get("solver", {}))
            sweep = SweepConfig(**d.get("sweep", {}))
            diag = DiagnosticsConfig(**d.get("diagnostics", {}))
        except ValidationError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed config: {exc}") from exc
        if not 0 < sigma < problem.a_inf:
            raise ValidationError(f"coefficients.sigma must lie in (0, a_inf) = (0, {problem.a_inf}), got {sigma}")
        if grid.kind == "box" and problem.N > 3:
            raise ValidationError("box grids support N <= 3")
        return cls(problem, a, b, sigma, grid, solver, sweep, diag, str(d.get("output", "out")), int(d.get("seed", 0)))

    def to_dict(self) -> dict:
        return {
            "problem": self.problem.to_dict(),
            "coefficients": {"a": self.a.to_dict(), "b": self.b.to_dict(), "sigma": self.sigma},
            "grid": self.grid.to_dict(),
            "solver": self.solver.to_dict(),
            "sweep": self.sweep.to_dict(),
            "diagnostics": self.diagnostics.to_dict(),
            "output": self.output,
            "seed": self.seed,
        }


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
    return RunConfig.from_dict(raw)


# ---------------------------------------------------------------- output

@dataclass
class RunManifest:
    command: str
    config: dict
    version: str = __version__
    started: float = field(default_factory=time.time)
    finished: float | None = None
    tasks: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    delta_h: float | None = None

    def to_dict(self) -> dict:
        return {"command": self.command, "config": self.config, "version": self.version,
                "started": self.started, "finished": self.finished, "tasks": self.tasks,
                "files": sorted(self.files), "delta_h": self.delta_h}


class Emitter:
    """Per-task file writes plus a single final manifest write."""

    def __init__(self, outdir, manifest: RunManifest):
        self.out = Path(outdir)
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ValidationError(f"output directory {outdir} is not writable: {exc}") from exc
        if not os.access(self.out, os.W_OK):
            raise ValidationError(f"output directory {outdir} is not writable")
        self.manifest = manifest

    def _register(self, name):
        if name not in self.manifest.files:
            self.manifest.files.append(name)
        return self.out / name

    def json(self, name, obj):
        path = self._register(name)
        with open(path, "w") as fh:
            json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def csv(self, name, header, rows):
        path = self._register(name)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(x) for x in row])

    def field(self, name, u):
        from .grids import write_field_csv
        write_field_csv(u, self._register(name))

    def close(self):
        self.manifest.finished = time.time()
        fd, tmp = tempfile.mkstemp(dir=self.out, prefix=".manifest.")
        with os.fdopen(fd, "w") as fh:
            json.dump(_jsonable(self.manifest.to_dict()), fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, self.out / "manifest.json")


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def emit_report(em: Emitter, kind: str, result) -> None:
    """Write the tables, summaries and plot-data (x, y columns) for one result."""
    if kind == "limit":
        em.json("limit.json", result.summary())
        em.field("limit_profile.csv", result.w)
        g = result.w.grid
        k = (g.N - 1) / 2
        r = g.nodes[1:-1]
        v = result.w.values[1:-1]
        ok = v > 0
        em.csv("decay_fit.dat", ["x", "y"], zip(r[ok], np.log(v[ok]) + k * np.log(r[ok])))
    elif kind == "solve":
        em.json("solve.json", result.summary())
        em.field("solution.csv", result.u)
        em.csv("trace.csv", ["iter", "energy", "grad_norm", "barycenter_norm", "boundary_mass"], result.trace)
    elif kind == "sweep":
        em.json("sweep.json", result.summary())
        em.csv("sweep.csv", ["lambda", "m_lambda", "escape_flag", "boundary_mass", "iterations"], result.rows())
        em.csv("m_lambda.dat", ["x", "y"], zip(result.lambdas, result.m_values))
    else:
        raise ValueError(f"unknown report kind {kind!r}")


# ---------------------------------------------------------------- commands

def cmd_hypotheses(cfg: RunConfig, em: Emitter) -> int:
    rep = classify_hypotheses(cfg.a, cfg.b, cfg.problem, cfg.sigma)
    em.json("hypotheses.json", rep.to_dict())
    em.manifest.tasks["hypotheses"] = "ok"
    print(json.dumps(rep.to_dict(), sort_keys=True))
    return EXIT_OK


def _limit_grid(cfg: RunConfig):
    if cfg.grid.kind == "radial":
        return cfg.grid.make(cfg.problem.N)
    from .limit_problem import default_radial_grid
    return default_radial_grid(cfg.problem)


def cmd_limit(cfg: RunConfig, em: Emitter) -> int:
    from .limit_problem import solve_limit
    st = solve_limit(cfg.problem.with_lambda(0.0), _limit_grid(cfg))
    emit_report(em, "limit", st)
    em.manifest.tasks["limit"] = "ok"
    print(json.dumps({"m_inf": st.m_inf, "peak": st.peak, "big_m": st.big_m}, sort_keys=True))
    return EXIT_OK


def cmd_solve(cfg: RunConfig, em: Emitter) -> int:
    from dataclasses import replace
    from .ground_state import minimize, scan_initial, discretization_budget
    g = cfg.grid.make(cfg.problem.N)
    opts = cfg.solver
    if g.kind == "box" and opts.init.kind == "soliton":
        opts = replace(opts, init=scan_initial(cfg.problem, cfg.a, cfg.b, g))
    res = minimize(cfg.problem, cfg.a, cfg.b, g, opts, record_trace=True)
    em.manifest.delta_h = discretization_budget(cfg.problem, g, cfg.solver)
    emit_report(em, "solve", res)
    em.manifest.tasks["solve"] = res.status
    print(json.dumps({"m": res.m, "converged": res.converged, "iterations": res.iterations}, sort_keys=True))
    if not res.converged:
        raise NonConvergence(f"descent ended with status {res.status} at grad_norm {res.grad_norm:.3e}")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, em: Emitter) -> int:
    from .sweep import estimate_lambda_star, lambda_sweep, worker_count
    ladder = cfg.grid.grids(cfg.problem.N)
    if len(ladder) < 2:
        raise ValidationError("a sweep needs a grid ladder with at least two extents (grid.ladder)")
    S = lambda_sweep(cfg.problem, cfg.a, cfg.b, cfg.sweep.lambdas, ladder, cfg.solver, workers=worker_count())
    delta = cfg.sweep.delta if cfg.sweep.delta is not None else 3 * S.delta_h
    S.lambda_star = estimate_lambda_star(S, delta, refine=cfg.sweep.refine)
    em.manifest.delta_h = S.delta_h
    emit_report(em, "sweep", S)
    bad = [e.lam for e in S.entries if not e.converged]
    em.manifest.tasks["sweep"] = "ok" if not bad else f"unconverged at {bad}"
    print(json.dumps({"lambda_star": S.lambda_star.to_dict(), "monotone_ok": S.monotone_ok}, sort_keys=True))
    if bad:
        raise NonConvergence(f"sweep entries did not converge at lambda = {bad}")
    return EXIT_OK


def cmd_diagnose(cfg: RunConfig, em: Emitter) -> int:
    from .ground_state import cached_limit
    from .topology import (check_overlap_lemma, estimate_b0, fit_interaction, interaction_integral,
                           psi_surface, radial_level, translated_bump_energy)
    P = cfg.problem
    N = P.N
    lim = cached_limit(P)
    dg = cfg.diagnostics
    if dg.y:
        rows = []
        for y in dg.y:
            pr = translated_bump_energy(y, P, cfg.a, cfg.b, lim)
            rows.append((*pr.y, pr.t, pr.energy, pr.competition))
        em.csv("bumps.csv", [*[f"y{i}" for i in range(N)], "t", "energy", "competition"], rows)
    xi = np.eye(N)[0]
    data = [interaction_integral(r, -xi, xi, lim) for r in dg.rho]
    em.csv("interaction.csv", ["rho", "separation", "eps", "eps_swapped"],
           [(d.rho, d.separation, d.eps, d.eps_swapped) for d in data])
    em.csv("interaction_fit.dat", ["x", "y"], [(d.rho, math.log(d.eps)) for d in data])
    summary = {}
    if len(data) >= 2:
        fit = fit_interaction(data, N)
        summary["interaction_fit"] = {"rate": fit.rate, "raw_rate": fit.raw_rate, "power": fit.power}
    if N >= 2:
        rho = max(dg.rho)
        rep = psi_surface(rho, P, cfg.a, cfg.b, lim, dg.resolution, h=dg.surface_h)
        gb = BoxGrid.from_spacing(N, dg.b0_half_width, dg.surface_h)
        b0 = estimate_b0(P, cfg.a, cfg.b, gb, opts=cfg.solver, limit=lim)
        rep.b0_estimate = b0.value
        rep.to_csv(em._register("psi_samples.csv"))
        summary["psi_surface"] = rep.to_dict()
        summary["b0"] = {"value": b0.value, "beta_norm": b0.beta_norm, "converged": b0.converged,
                         "penalty_weight": b0.penalty_weight, "heuristic": True}
    rl = radial_level(P, cfg.a, cfg.b, cfg.sweep.lambdas, opts=cfg.solver)
    em.csv("radial_level.csv", ["lambda", "m_radial", "converged"], [(r.lam, r.m, r.converged) for r in rl])
    if dg.overlap is not None:
        o = dg.overlap
        ov = check_overlap_lemma(o["g"], o["h"], xi, o["rho"], alpha=o["alpha"], b_exp=o["b_exp"],
                                 gamma=o["gamma"], N=N)
        em.csv("overlap.csv", ["rho", "lhs", "ratio"], zip(ov.rhos, ov.lhs, ov.ratios))
        summary["overlap"] = {"rhs": ov.rhs, "ratios": list(ov.ratios)}
    em.json("diagnostics.json", summary)
    em.manifest.tasks["diagnose"] = "ok"
    print(json.dumps(_jsonable(summary), sort_keys=True))
    return EXIT_OK


def cmd_verify(cfg: RunConfig, em: Emitter) -> int:
    from .verify import run_invariants
    checks = run_invariants(cfg)
    em.csv("verify.csv", ["check", "passed", "value", "bound"],
           [(c.name, c.passed, c.value, c.bound) for c in checks])
    failed = [c.name for c in checks if not c.passed]
    em.manifest.tasks["verify"] = "ok" if not failed else f"violations: {failed}"
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: value={c.value:.6g} bound={c.bound:.6g}")
    if failed:
        raise InvariantViolation(f"invariants violated: {failed}")
    return EXIT_OK


COMMANDS = {"limit": cmd_limit, "solve": cmd_solve, "sweep": cmd_sweep, "diagnose": cmd_diagnose,
            "hypotheses": cmd_hypotheses, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nehari", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("config", help="JSON run configuration")
    ap.add_argument("--out", help="output directory (overrides config.output)")
    ap.add_argument("--json", action="store_true", help="machine-readable error message on stderr")
    return ap


def _fail(code: int, msg: str, as_json: bool) -> int:
    if as_json:
        print(json.dumps({"error": msg, "exit_code": code}), file=sys.stderr)
    else:
        print(f"error: {msg}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    from .ground_state import NumericalBlowup
    from .limit_problem import ConvergenceError, ShootingError
    args = build_parser().parse_args(argv)
    em = None
    try:
        cfg = load_config(args.config)
        outdir = args.out or cfg.output
        em = Emitter(outdir, RunManifest(args.command, cfg.to_dict()))
        code = COMMANDS[args.command](cfg, em)
    except ValidationError as exc:
        return _fail(EXIT_VALIDATION, str(exc), args.json)
    except (NonConvergence, ConvergenceError, ShootingError, NumericalBlowup) as exc:
        code = _fail(EXIT_NONCONVERGED, str(exc), args.json)
    except InvariantViolation as exc:
        code = _fail(EXIT_INVARIANT, str(exc), args.json)
    if em is not None:
        em.close()
    return code


if __name__ == "__main__":
    sys.exit(main())
