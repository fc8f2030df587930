"""Barycenter, translated bumps, two-bump surfaces and overlap asymptotics.

Box grids are placed around the objects being probed; coefficients are
evaluated at the absolute positions of the shifted nodes, so a bump at y
on a small box sees a(x) near y exactly as it would on a huge box.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage
from scipy.integrate import quad

from .asymptotics import decay_fit, fit_rate_power, log_linear  # noqa: F401  (re-exported)
from .coefficients import CoefficientProfile, ProblemParams, ValidationError
from .energy import ZERO, breakdown, coefficient_values, reduced_energy, reduced_energy_from
from .grids import BoxGrid, Field, RadialGrid
from .limit_problem import LimitGroundState


class ClearanceError(ValidationError):
    pass


# ---------------------------------------------------------------- barycenter

@dataclass
class BarycenterData:
    mu: Field
    u_hat: Field
    beta: np.ndarray
    support: np.ndarray = field(repr=False, default=None)
    argmax: tuple = ()


def ball_kernel(h: float, N: int) -> np.ndarray:
    k = int(math.floor(1.0 / h + 1e-12))
    ax = np.arange(-k, k + 1) * h
    mesh = np.meshgrid(*([ax] * N), indexing="ij")
    return (sum(x * x for x in mesh) <= 1.0 + 1e-12).astype(float)


def barycenter(u: Field) -> BarycenterData:
    g = u.grid
    if g.kind != "box":
        raise ValidationError("the barycenter is defined on box grids")
    if u.is_zero():
        raise ValidationError("barycenter of the zero field is undefined")
    if not g.h < 1.0 / 3.0:
        raise ValidationError(f"barycenter runs need spacing < 1/3, got {g.h:g}")
    K = ball_kernel(g.h, g.N)
    mu = ndimage.convolve(np.abs(u.values), K, mode="constant", cval=0.0) / K.sum()
    imax = np.unravel_index(int(np.argmax(mu)), mu.shape)
    uh = np.maximum(mu - 0.5 * mu[imax], 0.0)
    w = g.weights
    mass = float(np.sum(w * uh))
    beta = np.array([float(np.sum(w * x * uh)) / mass for x in g.mesh])
    return BarycenterData(Field(g, mu), Field(g, uh), beta, uh > 0, imax)


def barycenter_penalty(grid: BoxGrid, weight: float):
    """P(u) = weight |beta(u)|^2 and its node-wise derivative dP/du_k.

    Differentiates through the ball average, the positive part and the
    maximum (the argmax is frozen, which is exact away from ties).
    """
    K = ball_kernel(grid.h, grid.N)
    cnt = K.sum()
    w = grid.weights

    def pen(vals):
        bd = barycenter(Field(grid, vals))
        beta = bd.beta
        S = bd.support
        mass = float(np.sum(w * bd.u_hat.values))
        proj = sum(bi * (x - bi) for bi, x in zip(beta, grid.mesh))
        f = w * S * proj
        s = np.sign(vals)
        dmu = ndimage.correlate(f, K, mode="constant", cval=0.0)
        delta = np.zeros_like(vals)
        delta[bd.argmax] = 1.0
        tail = ndimage.correlate(delta, K, mode="constant", cval=0.0)
        grad = 2 * weight / mass * s / cnt * (dmu - 0.5 * float(f.sum()) * tail)
        return weight * float(beta @ beta), grad * grid.free

    return pen


# ---------------------------------------------------------------- translated bumps

def _clearance(y, domain_half_width, a_inf):
    if domain_half_width is None:
        return
    pad = 5.0 / math.sqrt(a_inf)
    if np.max(np.abs(y)) + pad > domain_half_width:
        raise ClearanceError(f"point {list(y)} is closer than 5/sqrt(a_inf) to the box boundary")


def local_box(center, N: int, a_inf: float, h: float | None = None, extent: float = 12.0) -> BoxGrid:
    sa = math.sqrt(a_inf)
    h = 0.1 / sa if h is None else h
    return BoxGrid.from_spacing(N, extent / sa, h, center)


@dataclass(frozen=True)
class BumpProbe:
    y: tuple
    t: float
    energy: float
    competition: float
    reference: float        # reduced energy of the bump with zero coefficients on the same box


def translated_bump_energy(y, params: ProblemParams, a: CoefficientProfile, b: CoefficientProfile,
                           limit: LimitGroundState, h: float | None = None,
                           domain_half_width: float | None = None) -> BumpProbe:
    """Project w(. - y) onto the Nehari set of I_lambda.

    competition = (lam/2) int a w_y^2 - c int b w_y^{p+1} with c = t^{p-1}/(p+1);
    I_lambda(t w_y) < m_inf whenever it is negative.
    """
    y = np.asarray(y, float)
    if y.shape != (params.N,):
        raise ValidationError("y must have N components")
    _clearance(y, domain_half_width, params.a_inf)
    g = local_box(tuple(y), params.N, params.a_inf, h)
    wy = limit.sample(g, tuple(y))
    e = breakdown(wy, params, a, b)
    t = (e.q_lambda / e.b_total) ** (1.0 / (params.p - 1))
    comp = 0.5 * params.lam * e.mass_a - t ** (params.p - 1) / (params.p + 1) * e.nonlin_b
    ref = reduced_energy(wy, params)
    return BumpProbe(tuple(float(c) for c in y), float(t), reduced_energy_from(e, params.p), float(comp), ref)


# ---------------------------------------------------------------- interaction integral

@dataclass(frozen=True)
class InteractionData:
    rho: float
    separation: float
    eps: float
    eps_swapped: float

    @property
    def asymmetry(self) -> float:
        return abs(self.eps - self.eps_swapped) / max(abs(self.eps), 1e-300)


def pair_box(centers, N: int, a_inf: float, h: float, pad: float = 12.0) -> BoxGrid:
    c = np.asarray(centers, float)
    lo, hi = c.min(axis=0), c.max(axis=0)
    mid = 0.5 * (lo + hi)
    half = 0.5 * float(np.max(hi - lo)) + pad / math.sqrt(a_inf)
    return BoxGrid.from_spacing(N, half, h, tuple(mid))


def interaction_integral(rho: float, z, xi, limit: LimitGroundState, h: float | None = None) -> InteractionData:
    """eps_rho = int W_{rho z}^p W_{rho xi} for the L^{p+1}-normalized soliton W."""
    params = limit.params
    z = np.asarray(z, float)
    xi = np.asarray(xi, float)
    if z.shape != (params.N,) or xi.shape != (params.N,):
        raise ValidationError("z and xi must have N components")
    h = 0.1 / math.sqrt(params.a_inf) if h is None else h
    g = pair_box([rho * z, rho * xi], params.N, params.a_inf, h)
    A = limit.sample(g, tuple(rho * z), normalized=True).values
    B = limit.sample(g, tuple(rho * xi), normalized=True).values
    p = params.p
    w = g.weights
    e1 = float(np.sum(w * np.abs(A) ** p * B))
    e2 = float(np.sum(w * A * np.abs(B) ** p))
    return InteractionData(float(rho), float(rho * np.linalg.norm(z - xi)), e1, e2)


@dataclass(frozen=True)
class InteractionFit:
    rate: float          # compensated for the |d|^{-(N-1)/2} factor
    raw_rate: float
    power: float
    rhos: tuple
    eps: tuple


def fit_interaction(data: Sequence[InteractionData], N: int) -> InteractionFit:
    """Exponential rate of eps in rho (per unit rho, so 2 sqrt(a_inf) for |z - xi| = 2)."""
    rho = np.array([d.rho for d in data])
    sep = np.array([d.separation for d in data])
    eps = np.array([d.eps for d in data])
    k = (N - 1) / 2
    s, _ = log_linear(rho, np.log(eps) + k * np.log(sep))
    s_raw, _ = log_linear(rho, np.log(eps))
    if len(rho) >= 3:
        _, power, _ = fit_rate_power(rho, eps)
    else:
        power = math.nan
    return InteractionFit(-s, -s_raw, power, tuple(rho.tolist()), tuple(eps.tolist()))


# ---------------------------------------------------------------- two-bump surface

def sigma_points(xi, n: int) -> np.ndarray:
    """n samples of Sigma = boundary of the ball B_2(xi) (angles in 2D, Fibonacci sphere in 3D)."""
    xi = np.asarray(xi, float)
    N = xi.size
    if N == 1:
        return (xi + np.array([[-2.0], [2.0]]))[:, :]
    if N == 2:
        th = 2 * np.pi * np.arange(n) / n
        return xi + 2 * np.column_stack([np.cos(th), np.sin(th)])
    if N == 3:
        i = np.arange(n) + 0.5
        phi = np.arccos(1 - 2 * i / n)
        th = np.pi * (1 + 5 ** 0.5) * i
        return xi + 2 * np.column_stack([np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)])
    raise ValidationError("Sigma sampling supports N <= 3")


@dataclass
class PsiSurfaceReport:
    rho: float
    epsilon_rho: float
    t_rho: float
    s_rho: float
    b0_estimate: float
    two_m_inf: float
    m_inf: float
    samples: list = field(default_factory=list, repr=False)   # (iz, z..., s, energy, beta...)

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "samples"}
        d["b0_heuristic"] = True
        return d

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            n = (len(self.samples[0]) - 3) // 2 if self.samples else 0
            wr.writerow(["iz", *[f"z{i}" for i in range(n)], "s", "energy", *[f"beta{i}" for i in range(n)]])
            for row in self.samples:
                wr.writerow([row[0], *(repr(float(x)) for x in row[1:])])


def psi_surface(rho: float, params: ProblemParams, a: CoefficientProfile, b: CoefficientProfile,
                limit: LimitGroundState, resolution: int = 16, s_points: int | None = None,
                xi=None, h: float = 0.2, m_inf: float | None = None, b0: float = math.nan,
                with_barycenter: bool = True) -> PsiSurfaceReport:
    """Sampled max of I_lambda over the projected two-bump family Psi_rho on Sigma x [0, 1]."""
    if resolution < 8:
        raise ValidationError("psi_surface needs at least 8 samples of Sigma")
    # odd count so that the symmetric point s = 1/2 is sampled
    ns = resolution + 1 if s_points is None else s_points
    if ns < 8:
        raise ValidationError("psi_surface needs at least 8 samples in s")
    N = params.N
    xi = np.eye(N)[0] if xi is None else np.asarray(xi, float)
    Z = sigma_points(xi, resolution)
    g = pair_box(np.vstack([rho * Z, rho * xi[None]]), N, params.a_inf, h, pad=10.0)
    Wxi = limit.sample(g, tuple(rho * xi), normalized=True).values
    ss = np.linspace(0.0, 1.0, ns)
    samples = []
    tmax, smax = -math.inf, -math.inf
    for iz, z in enumerate(Z):
        Wz = limit.sample(g, tuple(rho * z), normalized=True).values
        for s in ss:
            if s == 1.0:
                psi = Wxi
            else:
                psi = (1 - s) * Wz + s * Wxi
            f = Field(g, psi)
            E = reduced_energy(f, params, a, b)
            beta = barycenter(f).beta if (with_barycenter and s == 0.0) else np.full(N, math.nan)
            samples.append((iz, *z, s, E, *beta))
            tmax = max(tmax, E)
            if s == 0.0:
                smax = max(smax, E)
    eps = interaction_integral(rho, Z[int(np.argmin(Z @ xi))], xi, limit, h).eps
    if m_inf is None:
        # same-grid m_inf: the single bump with zero coefficients on this box
        m_inf = reduced_energy(Field(g, Wxi), params.with_lambda(0.0))
    return PsiSurfaceReport(float(rho), eps, float(tmax), float(smax), float(b0), 2 * m_inf, m_inf, samples)


# ---------------------------------------------------------------- B_0 estimate

@dataclass(frozen=True)
class B0Estimate:
    value: float
    beta_norm: float
    penalty_weight: float
    converged: bool
    iterations: int
    heuristic: bool = True


def estimate_b0(params: ProblemParams, a: CoefficientProfile, b: CoefficientProfile, grid: BoxGrid,
                weight: float | None = None, opts=None, limit: LimitGroundState | None = None,
                u0: Field | None = None) -> B0Estimate:
    """Upper estimate of inf{I_lambda : beta(u) = 0} by a quadratic barycenter penalty."""
    from .ground_state import SolverOptions, cached_limit, minimize
    if grid.kind != "box":
        raise ValidationError("estimate_b0 needs a box grid")
    limit = cached_limit(params) if limit is None else limit
    if weight is None:
        weight = 10.0 * limit.m_inf / grid.half_width ** 2
    if not weight > 0:
        raise ValidationError("penalty weight must be positive")
    opts = SolverOptions() if opts is None else opts
    res = minimize(params, a, b, grid, opts, limit=limit, u0=u0, penalty=barycenter_penalty(grid, weight))
    beta = barycenter(res.u).beta
    return B0Estimate(float(res.m), float(np.linalg.norm(beta)), float(weight), res.converged, res.iterations)


# ---------------------------------------------------------------- radial level

def radial_level(params: ProblemParams, a: CoefficientProfile, b: CoefficientProfile, lambdas,
                 grid: RadialGrid | None = None, opts=None) -> list:
    """m_{lambda,r} along a lambda ladder, warm-started in order."""
    from .ground_state import SolverOptions, minimize
    for prof in (a, b):
        if not isinstance(prof, CoefficientProfile):
            raise ValidationError("radial_level needs radial coefficient profiles")
    if grid is None:
        sa = math.sqrt(params.a_inf)
        grid = RadialGrid.from_spacing(params.N, 40.0 / sa, 0.02 / sa)
    if grid.kind != "radial":
        raise ValidationError("radial_level runs on a radial grid")
    opts = SolverOptions() if opts is None else opts
    out = []
    prev = None
    for lam in lambdas:
        r = minimize(params.with_lambda(float(lam)), a, b, grid, opts, u0=prev)
        prev = r.u
        out.append(r)
    return out


# ---------------------------------------------------------------- overlap lemma

@dataclass
class OverlapReport:
    rhos: tuple
    lhs: tuple
    rhs: float
    ratios: tuple

    def to_dict(self) -> dict:
        return asdict(self)


def check_overlap_lemma(g_profile: CoefficientProfile, h_profile: CoefficientProfile, z, rhos,
                        alpha: float, b_exp: float = 0.0, gamma: float = 1.0, N: int = 2,
                        spacing: float = 0.02, domain_half_width: float | None = None) -> OverlapReport:
    """(int g(x + rho z) h(x)) e^{alpha rho |z|} |rho z|^b versus gamma int h e^{-alpha x.z/|z|}.

    h must be compactly supported; integrals are trapezoid sums on a box
    that covers supp h.
    """
    if not h_profile.compact:
        raise ValidationError("the overlap check needs a compactly supported h")
    z = np.asarray(z, float)
    if z.shape != (N,) or not np.linalg.norm(z) > 0:
        raise ValidationError("z must be a nonzero vector with N components")
    rhos = [float(r) for r in rhos]
    if len(rhos) < 3:
        raise ValidationError("the rho ladder needs at least 3 values")
    if domain_half_width is not None and max(rhos) * float(np.max(np.abs(z))) + h_profile.radius > domain_half_width:
        raise ClearanceError("largest shift leaves the domain")
    R = h_profile.radius
    box = BoxGrid.from_spacing(N, R, spacing)
    hv = h_profile(box.radius())
    zn = np.linalg.norm(z)
    e = z / zn
    proj = sum(ei * x for ei, x in zip(e, box.mesh))
    rhs = gamma * float(np.sum(box.weights * hv * np.exp(-alpha * proj)))
    lhs = []
    for rho in rhos:
        shifted = np.sqrt(sum((x + rho * zi) ** 2 for x, zi in zip(box.mesh, z)))
        val = float(np.sum(box.weights * g_profile(shifted) * hv))
        lhs.append(val * math.exp(alpha * rho * zn) * (rho * zn) ** b_exp)
    ratios = tuple(l / rhs if rhs != 0 else math.nan for l in lhs)
    return OverlapReport(tuple(rhos), tuple(lhs), rhs, ratios)


def radial_overlap_rhs(h_profile: CoefficientProfile, alpha: float) -> float:
    """Analytic-side oracle for radial h in 2D: int h(r) I0(alpha r) 2 pi r dr (adaptive quadrature)."""
    from scipy.special import i0
    return quad(lambda r: h_profile(np.array(r)) * i0(alpha * r) * 2 * math.pi * r, 0, h_profile.radius,
                epsabs=1e-13, epsrel=1e-12)[0]
