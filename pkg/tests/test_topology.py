import math

import numpy as np
import pytest

from nehari.coefficients import CoefficientProfile, ProblemParams, ValidationError
from nehari.energy import reduced_energy
from nehari.grids import BoxGrid, Field, RadialGrid
from nehari.ground_state import SolverOptions, cached_limit, minimize, reference_level
from nehari.topology import (ClearanceError, barycenter, barycenter_penalty, check_overlap_lemma, estimate_b0,
                             fit_interaction, interaction_integral, psi_surface, radial_level,
                             radial_overlap_rhs, sigma_points, translated_bump_energy)
from nehari.verify import random_field

from conftest import H3_A, H3_B, P1, P2

ZERO = CoefficientProfile.zero()
GB = BoxGrid.from_spacing(2, 8.0, 0.2)


def _gauss(grid, c, s=1.5):
    return Field.from_function(grid, lambda x, y: np.exp(-((x - c[0]) ** 2 + (y - c[1]) ** 2) / s ** 2))


def test_barycenter_radial_homogeneous_equivariant():
    h = GB.h
    u = _gauss(GB, (0, 0))
    b0 = barycenter(u).beta
    assert np.linalg.norm(b0) <= h
    for t in (0.3, -2.0, 17.0):
        # exact up to the rounding of |t u| = |t| |u|
        assert np.abs(barycenter(u * t).beta - b0).max() <= 1e-13 * GB.half_width
    z = np.array([3 * h, -5 * h])
    bz = barycenter(_gauss(GB, z)).beta
    assert np.abs(bz - (b0 + z)).max() <= h


def test_barycenter_domain_checks():
    with pytest.raises(ValidationError):
        barycenter(Field.zeros(GB))
    with pytest.raises(ValidationError):
        barycenter(Field.zeros(BoxGrid.from_spacing(2, 4.0, 0.5)) + _gauss(BoxGrid.from_spacing(2, 4.0, 0.5), (0, 0)))
    with pytest.raises(ValidationError):
        g = RadialGrid.from_spacing(2, 5.0, 0.1)
        barycenter(Field.from_function(g, lambda r: np.exp(-r)))


def test_penalty_gradient_fd():
    rng = np.random.default_rng(4)
    u = _gauss(GB, (1.0, -0.5)) + random_field(GB, rng, amplitude=0.1)
    pen = barycenter_penalty(GB, 0.7)
    val, grad = pen(u.values)
    v = random_field(GB, rng, amplitude=0.05).values
    eps = 1e-5
    fd = (pen(u.values + eps * v)[0] - pen(u.values - eps * v)[0]) / (2 * eps)
    assert fd == pytest.approx(float(np.sum(grad * v)), rel=1e-5)


def test_translated_bumps_approach_m_inf(lim2):
    P = P2.with_lambda(1.0)
    probes = [translated_bump_energy((r, 0.0), P, H3_A, H3_B, lim2) for r in (4.0, 6.0, 8.0, 10.0)]
    t = [p.t for p in probes]
    E = [p.energy - p.reference for p in probes]
    assert all(abs(b - 1) < abs(a - 1) for a, b in zip(t, t[1:]))
    assert all(abs(b) < abs(a) for a, b in zip(E, E[1:]))
    # fast-a data: the b-gain wins at large |y|
    assert probes[-1].competition < 0
    assert probes[-1].energy < probes[-1].reference


def test_translated_bump_zero_data(lim2):
    for y in [(0.0, 0.0), (3.0, 1.0), (-7.0, 2.0)]:
        pr = translated_bump_energy(y, P2.with_lambda(5.0), ZERO, ZERO, lim2)
        assert pr.t == pytest.approx(1.0, abs=2e-3)
        assert pr.energy == pr.reference
        assert pr.energy == pytest.approx(lim2.m_inf, rel=2e-3)


def test_translated_bump_clearance(lim2):
    with pytest.raises(ClearanceError):
        translated_bump_energy((9.0, 0.0), P2, H3_A, H3_B, lim2, domain_half_width=10.0)


def test_interaction_rate_and_symmetry(lim2):
    xi = np.array([1.0, 0.0])
    data = [interaction_integral(r, -xi, xi, lim2) for r in (3.0, 4.0, 5.0, 6.0)]
    fit = fit_interaction(data, 2)
    assert abs(fit.rate - 2.0) / 2.0 < 0.05
    assert max(d.asymmetry for d in data) < 1e-8
    assert all(d.separation == pytest.approx(2 * d.rho) for d in data)


def test_coincident_bumps(lim2):
    xi = np.array([0.0, 1.0])
    vals = [interaction_integral(r, xi, xi, lim2).eps for r in (1.0, 4.0)]
    # L^{p+1}-normalized soliton: int W^{p+1} = 1
    assert vals == pytest.approx([1.0, 1.0], rel=1e-3)
    assert vals[0] == pytest.approx(vals[1], rel=1e-10)


def test_one_dimensional_power(lim1):
    xi = np.array([1.0])
    data = [interaction_integral(r, -xi, xi, lim1, h=0.02) for r in (3.0, 4.0, 5.0, 6.0, 7.0)]
    assert abs(fit_interaction(data, 1).power) < 0.1


def test_sigma_points():
    xi = np.array([1.0, 0.0])
    Z = sigma_points(xi, 16)
    assert np.allclose(np.linalg.norm(Z - xi, axis=1), 2.0)
    Z3 = sigma_points(np.array([0.0, 0.0, 1.0]), 50)
    assert np.allclose(np.linalg.norm(Z3 - [0, 0, 1], axis=1), 2.0)


@pytest.fixture(scope="module")
def surface(lim2):
    return psi_surface(4.0, P2.with_lambda(1.0), H3_A, H3_B, lim2, resolution=8)


def test_psi_surface_properties(surface):
    S = surface
    assert S.s_rho <= S.t_rho
    rows = np.array(S.samples, dtype=float)
    s0 = rows[rows[:, 3] == 0.0]
    Z = s0[:, 1:3]
    beta = s0[:, 5:7]
    assert np.abs(beta - 4.0 * Z).max() <= 2 * 0.2
    assert len(rows) == 8 * 9


def test_psi_surface_pure(surface, lim2):
    again = psi_surface(4.0, P2.with_lambda(1.0), H3_A, H3_B, lim2, resolution=8)
    assert np.array_equal(np.array(again.samples, float), np.array(surface.samples, float), equal_nan=True)
    assert again.t_rho == surface.t_rho


def test_psi_samples_above_level(surface):
    g = BoxGrid.from_spacing(2, 16.0, 0.2)
    P = P2.with_lambda(1.0)
    from dataclasses import replace
    from nehari.ground_state import scan_initial
    m = minimize(P, H3_A, H3_B, g, replace(SolverOptions(), init=scan_initial(P, H3_A, H3_B, g))).m
    assert min(r[4] for r in surface.samples) >= m - 1e-6


def test_b0_zero_data():
    g = BoxGrid.from_spacing(2, 10.0, 0.2)
    est = estimate_b0(P2, ZERO, ZERO, g)
    assert est.value == pytest.approx(reference_level(P2, g), rel=1e-6)
    assert est.beta_norm < g.h and est.heuristic


def test_radial_level_zero_and_monotone(lim2):
    g = RadialGrid.from_spacing(2, 20.0, 0.05)
    rs = radial_level(P2, ZERO, ZERO, [0.0, 10.0], grid=g)
    assert rs[0].m == pytest.approx(lim2.m_inf, rel=1e-3) and rs[1].m == pytest.approx(rs[0].m, rel=1e-10)
    ms = [r.m for r in radial_level(P2, H3_A, H3_B, [0.0, 1.0, 10.0], grid=g)]
    assert all(b >= a for a, b in zip(ms, ms[1:]))


def test_overlap_compact_g_vanishes():
    g = CoefficientProfile.bump(1.0, 1.0)
    h = CoefficientProfile.bump(1.0, 1.0)
    rep = check_overlap_lemma(g, h, (1.0, 0.0), [1.0, 3.0, 5.0], alpha=1.0)
    assert rep.lhs[1] == 0.0 and rep.lhs[2] == 0.0


def test_overlap_rhs_quadrature_oracle():
    h = CoefficientProfile.bump(1.0, 1.0)
    g = CoefficientProfile.exp(1.0, 1.0)
    for z in [(1.0, 0.0), (0.6, 0.8)]:
        rep = check_overlap_lemma(g, h, z, [4.0, 8.0, 16.0], alpha=1.0, spacing=0.01)
        assert rep.rhs == pytest.approx(radial_overlap_rhs(h, 1.0), rel=1e-4)
        assert abs(rep.ratios[-1] - 1) < 0.05


def test_overlap_validation():
    with pytest.raises(ValidationError):
        check_overlap_lemma(H3_B, H3_B, (1.0, 0.0), [1, 2, 3], alpha=1.0)
    with pytest.raises(ClearanceError):
        check_overlap_lemma(H3_B, H3_A, (1.0, 0.0), [1, 2, 30], alpha=1.0, domain_half_width=20.0)
