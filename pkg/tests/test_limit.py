import math

import numpy as np
import pytest

from nehari.asymptotics import FitError, decay_fit
from nehari.coefficients import ProblemParams
from nehari.grids import Field, RadialGrid, h1_norm_sq
from nehari.limit_problem import (big_m, bisect_height, default_radial_grid, direct_energy, m_infinity,
                                  nehari_gap, shoot, solve_limit)

from conftest import P1, P2


@pytest.fixture(scope="module")
def unit1():
    return solve_limit(P1, default_radial_grid(P1))


def test_sech_oracle(unit1):
    assert unit1.m_inf == pytest.approx(4 / 3, rel=1e-3)
    assert unit1.peak == pytest.approx(math.sqrt(2), rel=1e-4)
    r, v = unit1.profile()
    exact = math.sqrt(2) / np.cosh(r)
    assert np.abs(v - exact)[r < 20].max() < 1e-4


def test_big_m_sech(unit1):
    assert big_m(unit1) == pytest.approx(4 / math.sqrt(3), rel=1e-4)
    assert abs(big_m(unit1) - h1_norm_sq(unit1.normalized_w, 1.0)) < 1e-4
    assert big_m(unit1) > 0


def test_nehari_and_identity(unit1):
    nrm = h1_norm_sq(unit1.w, 1.0)
    assert abs(nehari_gap(unit1)) <= 10 * 1e-9 * nrm
    assert direct_energy(unit1) == pytest.approx(m_infinity(unit1), rel=1e-8)
    assert m_infinity(unit1) == pytest.approx(0.25 * nrm, rel=1e-12)


@pytest.mark.parametrize("N", [1, 2, 3])
def test_positive_decreasing(N):
    P = ProblemParams(N, 3.0)
    st = solve_limit(P)
    w = st.w.values
    assert np.all(w[:-1] > 0) and np.all(np.diff(w[:-1]) < 0)
    assert st.m_inf > 0


@pytest.mark.parametrize("a_inf,b_inf", [(4.0, 1.0), (1.0, 2.0), (2.0, 3.0)])
def test_scaling_law(a_inf, b_inf):
    # w = (a/b)^{1/(p-1)} W(sqrt(a) x); m_inf = a^{(p+1)/(p-1) - N/2} b^{-2/(p-1)} m_unit
    p, N = 3.0, 2
    unit = solve_limit(ProblemParams(N, p))
    st = solve_limit(ProblemParams(N, p, a_inf, b_inf))
    sa = math.sqrt(a_inf)
    pred = a_inf ** ((p + 1) / (p - 1) - N / 2) * b_inf ** (-2 / (p - 1)) * unit.m_inf
    assert st.m_inf == pytest.approx(pred, rel=1e-4)
    r, v = st.profile()
    ru, vu = unit.profile()
    W = (a_inf / b_inf) ** (1 / (p - 1)) * np.interp(sa * r, ru, vu)
    sel = r < 10 / sa
    # interpolation error of the unit profile is O(h^2)
    assert np.abs(v - W)[sel].max() < 1e-4 * v[0]


def test_doubling_b_inf():
    m1 = solve_limit(ProblemParams(2, 3.0)).m_inf
    m2 = solve_limit(ProblemParams(2, 3.0, 1.0, 2.0)).m_inf
    assert m2 / m1 == pytest.approx(2 ** (-2 / 2.0), rel=1e-6)


@pytest.mark.parametrize("a_inf", [1.0, 4.0])
def test_decay_rate(a_inf):
    st = solve_limit(ProblemParams(2, 3.0, a_inf))
    assert abs(st.rate_fit - math.sqrt(a_inf)) / math.sqrt(a_inf) < 0.02
    assert st.d0_fit > 0


def test_refinement_order():
    ms = [solve_limit(P2, default_radial_grid(P2, h=h)).m_inf for h in (0.04, 0.02, 0.01)]
    order = math.log2(abs(ms[0] - ms[1]) / abs(ms[1] - ms[2]))
    assert 1.8 <= order <= 2.3


def test_shooting_classification():
    lo, hi = bisect_height(P2)
    assert hi - lo <= 1e-12 * hi
    assert shoot(1.05 * hi, P2, 30.0)[0] == "high"
    assert shoot(0.95 * lo, P2, 30.0)[0] == "low"


def test_synthetic_decay_fit():
    g = RadialGrid.from_spacing(1, 20.0, 0.01)
    u = Field.from_function(g, lambda r: np.exp(-2 * r))
    fit = decay_fit(u, 4.0)
    assert fit.rate == pytest.approx(2.0, abs=1e-3)


def test_fit_window_errors():
    g = RadialGrid.from_spacing(1, 8.0, 0.1)
    with pytest.raises(FitError):
        decay_fit(Field.from_function(g, lambda r: np.exp(-r)), 1.0)
    g = RadialGrid.from_spacing(1, 20.0, 0.1)
    with pytest.raises(FitError):
        decay_fit(Field.from_function(g, lambda r: np.cos(r)), 1.0)
