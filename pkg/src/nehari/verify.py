"""Invariant battery behind `nehari verify` (also reused by the test-suite)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .energy import (breakdown, energy_gradient, nehari_residual, pairing, project,
                     reduced_energy)
from .grids import Field, h1_norm_sq


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    bound: float


def random_field(grid, rng: np.random.Generator, n_bumps: int = 4, amplitude: float = 1.0) -> Field:
    """Smooth random field: a few gaussians with random centers, widths and signs."""
    coords = grid.coords()
    ext = grid.r_max if grid.kind == "radial" else grid.half_width
    vals = np.zeros(grid.shape)
    for _ in range(n_bumps):
        c = rng.uniform(-0.4, 0.4, size=len(coords)) * ext
        if grid.kind == "radial":
            c = np.abs(c) * 0.5
        wd = rng.uniform(0.5, 2.0)
        amp = amplitude * rng.uniform(0.3, 1.0) * rng.choice([-1.0, 1.0])
        vals += amp * np.exp(-sum((x - ci) ** 2 for x, ci in zip(coords, c)) / wd ** 2)
    return Field(grid, vals * grid.free)


def _energy_ext(vals, grid, params, av, bv):
    """Discrete I_lambda re-evaluated in extended precision (independent of energy.energy)."""
    ld = np.longdouble
    u = np.asarray(vals, dtype=ld)
    w = grid.weights.astype(ld)
    if grid.kind == "radial":
        kin = np.sum(grid.edge_coeff.astype(ld) * np.diff(u) ** 2)
    else:
        kin = sum(np.sum(np.diff(u, axis=ax) ** 2) for ax in range(grid.N)) * ld(grid.h) ** (grid.N - 2)
    mass = np.sum(w * (ld(params.a_inf) + ld(params.lam) * av.astype(ld)) * u * u)
    nl = np.sum(w * (ld(params.b_inf) + bv.astype(ld)) * np.abs(u) ** ld(params.p + 1))
    return kin / 2 + mass / 2 - nl / ld(params.p + 1)


def fd_order(u: Field, v: Field, params, a, b, eps=(1e-3, 1e-4)) -> tuple[float, list]:
    """Observed order of the central-difference error against <grad, v>.

    The differences are taken in extended precision: at eps = 1e-4 the
    float64 rounding of I(u +- eps v), about 1e-16 |I| / eps, can otherwise
    be as large as the O(eps^2) truncation error being measured.
    """
    from .energy import coefficient_values
    g = u.grid
    av, bv = coefficient_values(a, g), coefficient_values(b, g)
    exact = pairing(energy_gradient(u, params, a, b), v)
    U, V = u.values.astype(np.longdouble), v.values.astype(np.longdouble)
    errs = []
    for e in eps:
        el = np.longdouble(e)
        fd = (_energy_ext(U + el * V, g, params, av, bv) - _energy_ext(U - el * V, g, params, av, bv)) / (2 * el)
        errs.append(float(abs(fd - np.longdouble(exact))))
    order = math.log(errs[0] / errs[1]) / math.log(eps[0] / eps[1]) if errs[1] > 0 else math.inf
    return order, errs


def run_invariants(cfg) -> list:
    from dataclasses import replace
    from .coefficients import classify_hypotheses
    from .ground_state import discretization_budget, minimize, reference_level, scan_initial
    from .limit_problem import big_m, direct_energy, m_infinity, nehari_gap, solve_limit, default_radial_grid

    P = cfg.problem
    rng = np.random.default_rng(cfg.seed)
    out = []

    lim = solve_limit(P.with_lambda(0.0), default_radial_grid(P))
    w = lim.w.values
    nrm = h1_norm_sq(lim.w, P.a_inf)
    out.append(Check("limit_nehari_membership", abs(nehari_gap(lim)) <= 1e-8 * nrm, abs(nehari_gap(lim)) / nrm, 1e-8))
    out.append(Check("limit_positive_decreasing", bool(np.all(w[:-1] > 0) and np.all(np.diff(w[:-1]) < 0)),
                     float(np.max(np.diff(w[:-1]))), 0.0))
    gap = abs(direct_energy(lim) - m_infinity(lim)) / m_infinity(lim)
    out.append(Check("limit_energy_identity", gap <= 1e-8, gap, 1e-8))
    rate_err = abs(lim.rate_fit - math.sqrt(P.a_inf)) / math.sqrt(P.a_inf)
    out.append(Check("limit_decay_rate", rate_err <= 0.02, rate_err, 0.02))
    bm_err = abs(big_m(lim) - h1_norm_sq(lim.normalized_w, P.a_inf)) / big_m(lim)
    out.append(Check("big_m_consistency", bm_err <= 1e-4, bm_err, 1e-4))

    grid = cfg.grid.make(P.N)
    worst_t, worst_J, worst_pair = 0.0, 0.0, 0.0
    for _ in range(20):
        u = random_field(grid, rng)
        c = float(rng.uniform(0.1, 10.0))
        t1 = project(u, P, cfg.a, cfg.b).t
        t2 = project(u * c, P, cfg.a, cfg.b).t
        worst_t = max(worst_t, abs(t2 * c - t1) / t1)
        J1, J2 = reduced_energy(u, P, cfg.a, cfg.b), reduced_energy(u * c, P, cfg.a, cfg.b)
        worst_J = max(worst_J, abs(J2 - J1) / J1)
        G = nehari_residual(u, P, cfg.a, cfg.b)
        gp = pairing(energy_gradient(u, P, cfg.a, cfg.b), u)
        scale = breakdown(u, P, cfg.a, cfg.b).q_lambda
        worst_pair = max(worst_pair, abs(gp - G) / scale)
    out.append(Check("projection_homogeneity", worst_t <= 1e-12, worst_t, 1e-12))
    out.append(Check("reduced_energy_invariance", worst_J <= 1e-12, worst_J, 1e-12))
    out.append(Check("gradient_pairing", worst_pair <= 1e-8, worst_pair, 1e-8))
    order, _ = fd_order(random_field(grid, rng), random_field(grid, rng, amplitude=0.5), P, cfg.a, cfg.b)
    out.append(Check("gradient_fd_order", order >= 1.9, order, 1.9))

    opts = cfg.solver
    if grid.kind == "box" and opts.init.kind == "soliton":
        opts = replace(opts, init=scan_initial(P, cfg.a, cfg.b, grid))
    res = minimize(P, cfg.a, cfg.b, grid, opts)
    E = np.array(res.energies)
    jump = float(np.max(np.diff(E))) if E.size > 1 else 0.0
    out.append(Check("monotone_descent", jump <= 1e-12 * abs(E[0]), jump, 1e-12 * abs(E[0])))
    out.append(Check("level_positive", res.m > 0, res.m, 0.0))
    out.append(Check("solver_converged", res.converged, res.grad_norm, opts.tol_grad))
    q = breakdown(res.u, P, cfg.a, cfg.b).q_lambda
    nres = abs(nehari_residual(res.u, P, cfg.a, cfg.b)) / q
    out.append(Check("minimizer_on_nehari", nres <= 1e-8, nres, 1e-8))
    if opts.positivity:
        out.append(Check("minimizer_nonnegative", bool(np.all(res.u.values >= 0)), float(res.u.values.min()), 0.0))
    ref = reference_level(P, grid, cfg.solver)
    dh = discretization_budget(P, grid, cfg.solver)
    out.append(Check("upper_bound_m_inf", res.m <= ref + 3 * dh, res.m - ref, 3 * dh))
    probe_gap = min(reduced_energy(random_field(grid, rng), P, cfg.a, cfg.b) - res.m for _ in range(10))
    out.append(Check("infimum_property", probe_gap >= -1e-9 * res.m, probe_gap, 0.0))
    rep = classify_hypotheses(cfg.a, cfg.b, P, cfg.sigma)
    out.append(Check("h3_h4_exclusive", not (rep.h3 and rep.h4), float(rep.h3 and rep.h4), 0.0))
    return out
