import math

import numpy as np
import pytest

from nehari.coefficients import CoefficientProfile, ValidationError
from nehari.grids import BoxGrid, RadialGrid
from nehari.ground_state import SolverOptions, minimize
from nehari.sweep import (WORKERS_ENV, audit_map_properties, continuity_refinement, estimate_lambda_star,
                          lambda_sweep, worker_count)

from conftest import P1

ZERO = CoefficientProfile.zero()
BUMP = CoefficientProfile.bump(1.0, 1.0)
LADDER = [BoxGrid.from_spacing(1, L, 0.05) for L in (10.0, 15.0)]
LAMS = [0.0, 1.0, 10.0, 100.0, 1000.0]


@pytest.fixture(scope="module")
def bump_sweep():
    return lambda_sweep(P1, BUMP, BUMP, LAMS, LADDER, SolverOptions())


@pytest.fixture(scope="module")
def flat_sweep():
    return lambda_sweep(P1, ZERO, BUMP, LAMS[:3], LADDER, SolverOptions())


def test_zero_a_is_lambda_independent(flat_sweep):
    m = flat_sweep.m_values
    assert np.ptp(m) <= 1e-10 * m[0]
    assert m[0] < flat_sweep.m_inf - 3 * flat_sweep.delta_h
    ls = estimate_lambda_star(flat_sweep, 3 * flat_sweep.delta_h)
    assert ls.kind == "not_observed" and str(ls) == "not_observed_up_to(10)"
    assert flat_sweep.continuity_modulus <= 1e-10


def test_sweep_invariants(bump_sweep):
    S = bump_sweep
    assert np.all(np.diff(S.lambdas) > 0)
    assert S.monotone_ok and audit_map_properties(S).violations == []
    assert np.all(S.m_values > 0)
    assert np.all(S.m_values <= S.m_inf + 3 * S.delta_h)
    assert S.m_values[0] < S.m_inf
    assert all(e.converged for e in S.entries)
    assert len(S.rows()) == len(LAMS)


def test_warm_and_cold_agree(bump_sweep):
    tol = 2 * SolverOptions().tol_grad
    g = LADDER[-1]
    for e in bump_sweep.entries:
        P = P1.with_lambda(e.lam)
        cold = minimize(P, BUMP, BUMP, g, SolverOptions(), u0=e.u * 1.3)
        assert abs(cold.m - e.m) <= tol * e.m


def test_lambda_star_bracket(bump_sweep):
    S = bump_sweep
    ls = estimate_lambda_star(S, 3 * S.delta_h)
    assert ls.kind == "bracket" and ls.persistent
    assert 0 < ls.lo < ls.hi and (ls.hi - ls.lo) <= 0.01 * ls.hi
    below = [e for e in S.entries if e.lam < ls.lo]
    assert below and all(e.m < S.m_inf - 3 * S.delta_h for e in below)


def test_lambda_star_monotone_under_tightening(bump_sweep):
    S = bump_sweep
    d = S.delta_h
    coarse = [estimate_lambda_star(S, k * d, refine=False).estimate for k in (8.0, 4.0, 2.0, 1.2)]
    assert all(b >= a for a, b in zip(coarse, coarse[1:]))
    fine = [estimate_lambda_star(S, k * d).estimate for k in (4.0, 1.5)]
    assert fine[1] >= fine[0] * (1 - 0.01)


def test_delta_must_exceed_budget(bump_sweep):
    with pytest.raises(ValidationError):
        estimate_lambda_star(bump_sweep, 0.5 * bump_sweep.delta_h)


def test_csv_and_summary(bump_sweep, tmp_path):
    bump_sweep.to_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "lambda,m_lambda,escape_flag,boundary_mass,iterations"
    assert len(lines) == 1 + len(LAMS)
    assert "lambda_star" in bump_sweep.summary()


def test_continuity_refinement():
    g = LADDER[-1]
    m1, m2 = continuity_refinement(P1, BUMP, BUMP, 0.0, 0.4, 5, g)
    assert 0.25 <= m2 / m1 <= 0.75


def test_constant_sweep_modulus_zero(flat_sweep):
    assert audit_map_properties(flat_sweep).continuity_modulus == pytest.approx(0.0, abs=1e-10)


def test_ladder_validation():
    with pytest.raises(ValidationError):
        lambda_sweep(P1, BUMP, BUMP, LAMS, [RadialGrid.from_spacing(1, 10.0, 0.05)] * 2, SolverOptions())
    with pytest.raises(ValidationError):
        lambda_sweep(P1, BUMP, BUMP, LAMS, LADDER[:1], SolverOptions())
    with pytest.raises(ValidationError):
        lambda_sweep(P1, BUMP, BUMP, [1.0, 0.5], LADDER, SolverOptions())


def test_worker_env(monkeypatch):
    monkeypatch.setenv(WORKERS_ENV, "3")
    assert worker_count() == 3
    monkeypatch.delenv(WORKERS_ENV)
    assert worker_count() == 1
    monkeypatch.setenv(WORKERS_ENV, "zero")
    with pytest.raises(ValidationError):
        worker_count()


def test_pool_matches_serial(bump_sweep):
    S = lambda_sweep(P1, BUMP, BUMP, LAMS, LADDER, SolverOptions(), workers=2)
    assert np.array_equal(S.m_values, bump_sweep.m_values)
