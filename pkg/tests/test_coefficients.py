import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nehari.coefficients import (CoefficientProfile, ProblemParams, ValidationError, classify_hypotheses,
                                 eval_coefficient)

from conftest import H3_A, H3_B, H4_A, H4_B, P2, SIGMA_H4

families = st.sampled_from(["zero", "compact_bump", "exponential", "power_exponential"])
profiles = st.builds(CoefficientProfile, family=families,
                     amplitude=st.floats(0, 5), rate=st.floats(0, 4), power=st.floats(0, 6),
                     radius=st.floats(0.2, 5))


def test_eval_examples():
    assert eval_coefficient(CoefficientProfile.zero(), 3.7) == 0.0
    assert eval_coefficient(CoefficientProfile.bump(1.0, 1.0), 1.0) == 0.0
    assert eval_coefficient(CoefficientProfile.exp(2.0, 1.0), 0.0) == 2.0


def test_bump_support_is_exact():
    b = CoefficientProfile.bump(1.0, 2.0)
    r = np.linspace(0, 4, 401)
    v = b(r)
    assert np.all(v[r < 2.0] > 0) and np.all(v[r >= 2.0] == 0)


@given(profiles, st.floats(0, 20), st.floats(0, 20))
def test_eval_nonincreasing_and_bounded(prof, r1, r2):
    lo, hi = sorted((r1, r2))
    if prof.compact:
        lo = max(lo, prof.radius)
        hi = max(hi, lo)
    assert prof(hi) <= prof(lo) + 1e-15
    assert 0 <= prof(lo) <= prof.amplitude + 1e-15


def test_classify_h3_pair():
    rep = classify_hypotheses(H3_A, H3_B, P2, 0.81)
    assert rep.h3 and not rep.h4 and rep.regime == "fast_a"
    assert math.isinf(rep.alpha) and rep.beta == pytest.approx(0.5)


def test_classify_h4_pair():
    rep = classify_hypotheses(H4_A, H4_B, P2, SIGMA_H4)
    assert rep.h4 and not rep.h3 and rep.regime == "slow_a"
    assert rep.alpha == pytest.approx(0.5) and math.isinf(rep.beta)


def test_classify_degenerate_pair():
    z = CoefficientProfile.zero()
    rep = classify_hypotheses(z, z, P2, 0.81)
    assert not rep.h1 and not rep.h2 and rep.regime == "unclassified"


def test_classify_exponential_pair():
    rep = classify_hypotheses(CoefficientProfile.exp(1.0, 3.0), CoefficientProfile.exp(1.0, 1.0), P2, 0.81)
    assert rep.h3 and rep.alpha == pytest.approx(3.0) and rep.beta == pytest.approx(1.0)


@given(profiles, profiles, st.floats(0.01, 0.99), st.sampled_from([1, 2, 3]))
def test_h3_h4_exclusive_and_pure(a, b, sigma, N):
    P = ProblemParams(N=N, p=3.0 if N < 3 else 2.5)
    rep = classify_hypotheses(a, b, P, sigma)
    assert not (rep.h3 and rep.h4)
    assert rep == classify_hypotheses(a, b, P, sigma)
    if rep.h3:
        assert rep.beta < min(2.0, rep.alpha)
    if rep.h4:
        assert rep.alpha <= min(P.p + 1, rep.beta)


def test_h5_needs_fast_enough_a():
    assert classify_hypotheses(CoefficientProfile.exp(1.0, 3.0), H4_B, P2, 0.81).h5
    assert not classify_hypotheses(H4_A, H4_B, P2, SIGMA_H4).h5
    assert classify_hypotheses(H3_A, H3_B, P2, 0.81).h5


def test_subcriticality_message():
    with pytest.raises(ValidationError, match=r"\(N\+2\)/\(N-2\)"):
        ProblemParams(N=3, p=5.0)
    ProblemParams(N=3, p=4.9)
    ProblemParams(N=2, p=50.0)


@pytest.mark.parametrize("kw", [dict(a_inf=0.0), dict(b_inf=-1.0), dict(lam=-1.0), dict(p=1.0)])
def test_param_validation(kw):
    base = dict(N=2, p=3.0)
    base.update(kw)
    with pytest.raises(ValidationError):
        ProblemParams(**base)


def test_sigma_range():
    with pytest.raises(ValidationError):
        classify_hypotheses(H3_A, H3_B, P2, 1.0)


@given(profiles)
def test_profile_roundtrip(prof):
    assert CoefficientProfile.from_dict(json.loads(json.dumps(prof.to_dict()))) == prof


def test_params_roundtrip():
    P = ProblemParams(3, 2.5, 2.0, 0.5, 7.0)
    assert ProblemParams.from_dict(P.to_dict()) == P
