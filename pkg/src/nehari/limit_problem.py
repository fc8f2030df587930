"""Ground state w of -Lap w + a_inf w = b_inf w^p and its level m_inf.

The initial height is found by shooting on the radial ODE and bisecting
between trajectories that cross zero (height too large) and ones that
turn back up while still positive (height too small).  The shot profile
then seeds a Newton iteration for the discrete Dirichlet problem on the
target grid, so the returned field is an exact discrete critical point.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import solve_banded

from .asymptotics import DecayFit, FitError, decay_fit
from .coefficients import ProblemParams
from .energy import breakdown, gradient_values, energy, weighted_norm
from .grids import Field, RadialGrid, h1_norm_sq, lp_norm


class ShootingError(RuntimeError):
    pass


class ConvergenceError(RuntimeError):
    pass


EVENT_TOL = 1e-12


def _rhs(N, a, b, p):
    def f(r, y):
        w, dw = y
        return [dw, a * w - b * abs(w) ** (p - 1) * w - (N - 1) / r * dw]
    return f


def _start(w0, N, a, b, p):
    r0 = 1e-4 / math.sqrt(a)
    c = (a * w0 - b * w0 ** p) / N
    return r0, [w0 + 0.5 * c * r0 * r0, c * r0]


def shoot(w0: float, params: ProblemParams, r_end: float, dense: bool = False):
    """Integrate from height w0; returns (kind, event radius, solution).

    kind is 'high' (crossed zero), 'low' (w' turned positive while w > 0)
    or 'none' (neither before r_end).
    """
    N, a, b, p = params.N, params.a_inf, params.b_inf, params.p

    def cross(r, y):
        return y[0]
    cross.terminal, cross.direction = True, -1

    def turn(r, y):
        return y[1]
    turn.terminal, turn.direction = True, 1

    r0, y0 = _start(w0, N, a, b, p)
    if y0[1] >= 0:
        return "low", r0, None
    sol = solve_ivp(_rhs(N, a, b, p), (r0, r_end), y0, method="DOP853", rtol=1e-12, atol=1e-14 * w0,
                    events=(cross, turn), dense_output=dense)
    if sol.t_events[0].size:
        return "high", float(sol.t_events[0][0]), sol
    if sol.t_events[1].size:
        return "low", float(sol.t_events[1][0]), sol
    return "none", r_end, sol


def bisect_height(params: ProblemParams, tol: float = EVENT_TOL, max_iter: int = 200):
    eq = (params.a_inf / params.b_inf) ** (1.0 / (params.p - 1))
    lo, hi = eq, 4 * eq
    r_end = 80.0 / math.sqrt(params.a_inf)
    for _ in range(10):
        if shoot(hi, params, r_end)[0] == "high":
            break
        hi *= 2
    else:
        raise ShootingError("no bracketing height found for the shooting bisection")
    for _ in range(max_iter):
        if hi - lo <= tol * hi:
            return lo, hi
        mid = 0.5 * (lo + hi)
        kind = shoot(mid, params, r_end)[0]
        if kind == "high":
            hi = mid
        elif kind == "low":
            lo = mid
        else:
            return mid, mid
    raise ConvergenceError("shooting bisection did not converge")


def shot_profile(params: ProblemParams, r: np.ndarray):
    """Continuum soliton sampled at radii r, with an asymptotic tail past the separatrix."""
    lo, hi = bisect_height(params)
    r_end = 80.0 / math.sqrt(params.a_inf)
    _, r_lo, s_lo = shoot(lo, params, r_end, dense=True)
    _, r_hi, s_hi = shoot(hi, params, r_end, dense=True)
    r_stop = min(r_lo, r_hi)
    probe = np.linspace(1e-4 / math.sqrt(params.a_inf), r_stop, 4000)
    w_lo, w_hi = s_lo.sol(probe)[0], s_hi.sol(probe)[0]
    bad = np.nonzero(np.abs(w_lo - w_hi) > 1e-4 * np.abs(w_lo))[0]
    r_good = probe[bad[0] - 1] if bad.size and bad[0] > 0 else probe[-1]
    r_good = min(r_good, 0.8 * r_stop)
    sa = math.sqrt(params.a_inf)
    k = (params.N - 1) / 2
    out = np.empty_like(r, dtype=float)
    inside = r <= r_good
    ri = np.clip(r[inside], probe[0], None)
    out[inside] = 0.5 * (s_lo.sol(ri)[0] + s_hi.sol(ri)[0])
    out[r < probe[0]] = 0.5 * (lo + hi)
    wg = 0.5 * (s_lo.sol(r_good)[0] + s_hi.sol(r_good)[0])
    ro = r[~inside]
    out[~inside] = wg * (r_good / ro) ** k * np.exp(-sa * (ro - r_good))
    return out, 0.5 * (lo + hi)


def newton_polish(u0: np.ndarray, grid: RadialGrid, params: ProblemParams, tol: float,
                  max_iter: int = 50) -> tuple[np.ndarray, float]:
    """Newton's method for the discrete Dirichlet problem of the limit equation."""
    free = grid.free
    n = int(free.sum())
    c = grid.edge_coeff
    w = grid.weights
    zero = np.zeros(grid.m)
    u = u0.copy()
    u[~free] = 0
    res = math.inf
    for _ in range(max_iter):
        g = gradient_values(u, grid, params, zero, zero)
        unorm = math.sqrt(h1_norm_sq(Field(grid, u), params.a_inf))
        res = weighted_norm(Field(grid, g)) / unorm
        if res < tol:
            return u, res
        diag = np.zeros(grid.m)
        diag[:-1] += c
        diag[1:] += c
        diag += w * (params.a_inf - params.p * params.b_inf * np.abs(u) ** (params.p - 1))
        ab = np.zeros((3, n))
        ab[0, 1:] = -c[: n - 1]
        ab[1] = diag[free]
        ab[2, :-1] = -c[: n - 1]
        step = solve_banded((1, 1), ab, (w * g)[free])
        u[free] -= step
    if res < 10 * tol:
        return u, res
    raise ConvergenceError(f"Newton polish stalled at residual {res:.3e}")


@dataclass
class LimitGroundState:
    params: ProblemParams
    w: Field
    m_inf: float
    peak: float
    shoot_param: float
    d0_fit: float
    rate_fit: float
    normalized_w: Field
    big_m: float
    residual: float

    def profile(self, normalized: bool = False):
        f = self.normalized_w if normalized else self.w
        return f.grid.nodes, f.values

    def sample(self, grid, center=None, normalized: bool = False) -> Field:
        """Translate the soliton onto another grid (radial interpolation)."""
        r, v = self.profile(normalized)
        return Field(grid, grid.sample_radial(r, v, center))

    def summary(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "grid": self.w.grid.describe(),
            "m_inf": self.m_inf,
            "peak": self.peak,
            "shoot_param": self.shoot_param,
            "d0_fit": self.d0_fit,
            "rate_fit": self.rate_fit,
            "big_m": self.big_m,
            "residual": self.residual,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)


def default_radial_grid(params: ProblemParams, h: float = 0.01, r_max: float | None = None) -> RadialGrid:
    sa = math.sqrt(params.a_inf)
    return RadialGrid.from_spacing(params.N, r_max if r_max is not None else 30.0 / sa, h / sa)


def solve_limit(params: ProblemParams, grid: RadialGrid | None = None, tol: float = 1e-9) -> LimitGroundState:
    if not tol > 0:
        raise ValueError("tol must be positive")
    if grid is None:
        grid = default_radial_grid(params)
    if grid.kind != "radial" or grid.N != params.N:
        raise ValueError("the limit problem is solved on a radial grid of matching dimension")
    guess, height = shot_profile(params, grid.nodes)
    vals, res = newton_polish(guess, grid, params, tol)
    if np.any(vals[:-1] <= 0):
        raise ConvergenceError("polished soliton is not positive")
    w = Field(grid, vals)
    nrm2 = h1_norm_sq(w, params.a_inf)
    m_inf = params.nehari_factor * nrm2
    try:
        fit: DecayFit | None = decay_fit(w, params.a_inf)
    except FitError:
        fit = None
    Wn = w * (1.0 / lp_norm(w, params.p + 1))
    return LimitGroundState(
        params=params, w=w, m_inf=m_inf, peak=float(vals[0]), shoot_param=height,
        d0_fit=fit.d0 if fit else math.nan, rate_fit=fit.rate if fit else math.nan,
        normalized_w=Wn, big_m=big_m_formula(params, m_inf), residual=res,
    )


def m_infinity(state: LimitGroundState) -> float:
    return state.params.nehari_factor * h1_norm_sq(state.w, state.params.a_inf)


def big_m_formula(params: ProblemParams, m_inf: float) -> float:
    p = params.p
    return params.b_inf ** (2 / (p + 1)) * (2 * (p + 1) / (p - 1) * m_inf) ** ((p - 1) / (p + 1))


def big_m(state: LimitGroundState) -> float:
    return big_m_formula(state.params, state.m_inf)


def direct_energy(state: LimitGroundState) -> float:
    return energy(state.w, state.params)[0]


def nehari_gap(state: LimitGroundState) -> float:
    e = breakdown(state.w, state.params)
    return e.q_lambda - e.b_total
