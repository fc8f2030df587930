"""Energy algebra of the Nehari constraint: I_lambda, G_lambda, projection, reduced energy."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from .coefficients import CoefficientProfile, ProblemParams
from .grids import Field

ZERO = CoefficientProfile.zero()


class DegenerateField(ValueError):
    """The field is zero (or has no nonlinear mass), so no Nehari projection exists."""


@lru_cache(maxsize=64)
def coefficient_values(profile: CoefficientProfile, grid) -> np.ndarray:
    vals = np.asarray(profile(grid.radius()), dtype=float)
    vals.setflags(write=False)
    return vals


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    mass_inf: float
    mass_a: float
    nonlin_inf: float
    nonlin_b: float
    lam: float

    @property
    def q_lambda(self) -> float:
        return self.kinetic + self.mass_inf + self.lam * self.mass_a

    @property
    def b_total(self) -> float:
        return self.nonlin_inf + self.nonlin_b

    def to_dict(self) -> dict:
        d = asdict(self)
        d["q_lambda"] = self.q_lambda
        d["b_total"] = self.b_total
        return d


def breakdown(u: Field, params: ProblemParams, a: CoefficientProfile = ZERO,
              b: CoefficientProfile = ZERO) -> EnergyBreakdown:
    g = u.grid
    v = u.values
    w = g.weights
    v2 = v * v
    vp = np.abs(v) ** (params.p + 1)
    av = coefficient_values(a, g)
    bv = coefficient_values(b, g)
    return EnergyBreakdown(
        kinetic=g.kinetic(v, v),
        mass_inf=params.a_inf * float(np.sum(w * v2)),
        mass_a=float(np.sum(w * av * v2)),
        nonlin_inf=params.b_inf * float(np.sum(w * vp)),
        nonlin_b=float(np.sum(w * bv * vp)),
        lam=params.lam,
    )


def energy(u: Field, params: ProblemParams, a: CoefficientProfile = ZERO,
           b: CoefficientProfile = ZERO) -> tuple[float, EnergyBreakdown]:
    e = breakdown(u, params, a, b)
    return 0.5 * e.q_lambda - e.b_total / (params.p + 1), e


def nehari_residual(u: Field, params: ProblemParams, a: CoefficientProfile = ZERO,
                    b: CoefficientProfile = ZERO) -> float:
    if u.is_zero():
        raise DegenerateField("G_lambda is only defined for nonzero fields")
    e = breakdown(u, params, a, b)
    return e.q_lambda - e.b_total


@dataclass(frozen=True)
class NehariProjection:
    t: float
    residual_after: float
    field: Field


def _scale(e: EnergyBreakdown, p: float) -> float:
    if e.b_total <= 0:
        raise DegenerateField("b_total vanishes; the field carries no nonlinear mass")
    return (e.q_lambda / e.b_total) ** (1.0 / (p - 1))


def project(u: Field, params: ProblemParams, a: CoefficientProfile = ZERO,
            b: CoefficientProfile = ZERO) -> NehariProjection:
    """Closed-form scaling t with t*u on the Nehari set."""
    if u.is_zero():
        raise DegenerateField("cannot project the zero field")
    e = breakdown(u, params, a, b)
    t = _scale(e, params.p)
    # G(tu) = t^2 q - t^{p+1} B evaluated from the unscaled integrals
    q, B = t * t * e.q_lambda, t ** (params.p + 1) * e.b_total
    return NehariProjection(t, abs(q - B) / q, u * t)


def reduced_energy_from(e: EnergyBreakdown, p: float) -> float:
    if e.b_total <= 0:
        raise DegenerateField("b_total vanishes; the field carries no nonlinear mass")
    ratio = e.q_lambda / e.b_total ** (2.0 / (p + 1))
    return (p - 1) / (2 * (p + 1)) * ratio ** ((p + 1) / (p - 1))


def reduced_energy(u: Field, params: ProblemParams, a: CoefficientProfile = ZERO,
                   b: CoefficientProfile = ZERO) -> float:
    """I_lambda(t_lambda(u) u); invariant under u -> c u, c > 0."""
    if u.is_zero():
        raise DegenerateField("reduced energy of the zero field is undefined")
    return reduced_energy_from(breakdown(u, params, a, b), params.p)


def gradient_values(v: np.ndarray, grid, params: ProblemParams, av: np.ndarray, bv: np.ndarray) -> np.ndarray:
    out = grid.neg_laplacian(v)
    out += (params.a_inf + params.lam * av) * v
    out -= (params.b_inf + bv) * np.abs(v) ** (params.p - 1) * v
    out[~grid.free] = 0.0
    return out


def energy_gradient(u: Field, params: ProblemParams, a: CoefficientProfile = ZERO,
                    b: CoefficientProfile = ZERO) -> Field:
    """Node-wise L2 representative of I_lambda'(u): sum(w * g * v) = I'(u)[v]."""
    g = u.grid
    return Field(g, gradient_values(u.values, g, params, coefficient_values(a, g), coefficient_values(b, g)))


def weighted_norm(f: Field) -> float:
    return float(np.sqrt(np.sum(f.grid.weights * f.values ** 2)))


def pairing(f: Field, g: Field) -> float:
    f._check(g)
    return float(np.sum(f.grid.weights * f.values * g.values))
