"""Coefficient families a(x), b(x) and the decay-hypothesis classifier.

Every profile is radial and closed-form, so the integrability conditions
at infinity that separate the regimes are decided analytically from the
family parameters instead of by numerical quadrature of tails.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

FAMILIES = ("zero", "compact_bump", "exponential", "power_exponential")


class ValidationError(ValueError):
    """Raised for parameter sets that violate a documented constraint."""


@dataclass(frozen=True)
class ProblemParams:
    N: int
    p: float
    a_inf: float = 1.0
    b_inf: float = 1.0
    lam: float = 0.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValidationError(f"dimension N must be a positive integer, got {self.N}")
        if not self.p > 1:
            raise ValidationError(f"exponent p must exceed 1, got {self.p}")
        if self.N >= 3:
            crit = (self.N + 2) / (self.N - 2)
            if self.p >= crit:
                raise ValidationError(
                    f"p={self.p} is not subcritical: need p < (N+2)/(N-2) = {crit:g} for N={self.N}"
                )
        if not self.a_inf > 0 or not self.b_inf > 0:
            raise ValidationError("a_inf and b_inf must be positive")
        if self.lam < 0:
            raise ValidationError(f"lambda must be nonnegative, got {self.lam}")

    def with_lambda(self, lam: float) -> "ProblemParams":
        return ProblemParams(self.N, self.p, self.a_inf, self.b_inf, float(lam))

    @property
    def nehari_factor(self) -> float:
        """1/2 - 1/(p+1): energy per unit of q_lambda on the Nehari set."""
        return 0.5 - 1.0 / (self.p + 1.0)

    def to_dict(self) -> dict:
        return {"N": self.N, "p": self.p, "a_inf": self.a_inf, "b_inf": self.b_inf, "lambda": self.lam}

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemParams":
        return cls(N=int(d["N"]), p=float(d["p"]), a_inf=float(d.get("a_inf", 1.0)),
                   b_inf=float(d.get("b_inf", 1.0)), lam=float(d.get("lambda", 0.0)))


@dataclass(frozen=True)
class CoefficientProfile:
    """Radial coefficient A * shape(|x|).

    rate is the absolute exponential rate (1/length), power the algebraic
    exponent of (1+r)^-q, radius the support radius of the bump.
    """

    family: str = "zero"
    amplitude: float = 0.0
    rate: float = 0.0
    power: float = 0.0
    radius: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown coefficient family {self.family!r}")
        if self.amplitude < 0 or self.rate < 0 or self.power < 0:
            raise ValidationError("amplitude, rate and power must be nonnegative")
        if not self.radius > 0:
            raise ValidationError("bump radius must be positive")

    @classmethod
    def zero(cls) -> "CoefficientProfile":
        return cls("zero")

    @classmethod
    def bump(cls, amplitude: float, radius: float = 1.0) -> "CoefficientProfile":
        return cls("compact_bump", amplitude=amplitude, radius=radius)

    @classmethod
    def exp(cls, amplitude: float, rate: float) -> "CoefficientProfile":
        return cls("exponential", amplitude=amplitude, rate=rate)

    @property
    def is_zero(self) -> bool:
        return self.family == "zero" or self.amplitude == 0

    @property
    def compact(self) -> bool:
        return self.family == "compact_bump"

    def __call__(self, r):
        return eval_coefficient(self, r)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CoefficientProfile":
        return cls(family=d.get("family", "zero"), amplitude=float(d.get("amplitude", 0.0)),
                   rate=float(d.get("rate", 0.0)), power=float(d.get("power", 0.0)),
                   radius=float(d.get("radius", 1.0)))


def eval_coefficient(profile: CoefficientProfile, r):
    """Evaluate the profile at radius r (scalar or array, r >= 0)."""
    r = np.asarray(r, dtype=float)
    A = profile.amplitude
    if profile.family == "zero" or A == 0:
        out = np.zeros_like(r)
    elif profile.family == "compact_bump":
        s = np.maximum(0.0, 1.0 - (r / profile.radius) ** 2)
        out = A * s * s
    elif profile.family == "exponential":
        out = A * np.exp(-profile.rate * r)
    else:
        out = A * (1.0 + r) ** (-profile.power) * np.exp(-profile.rate * r)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class HypothesisReport:
    h1: bool
    h2: bool
    h3: bool
    h4: bool
    h5: bool
    alpha: float
    beta: float
    sigma: float
    regime: str

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("alpha", "beta"):
            if math.isinf(d[k]):
                d[k] = "inf"
        return d


def _decays(profile: CoefficientProfile, N: int) -> bool:
    # nonzero, -> 0 at infinity and in L^{N/2}
    if profile.is_zero:
        return False
    if profile.compact or profile.rate > 0:
        return True
    return profile.family == "power_exponential" and profile.power * N / 2 > N


def _weighted_integrable(profile: CoefficientProfile, growth: float, extra_power: float, N: int) -> bool:
    """Is  int profile(|x|) |x|^extra_power e^{growth |x|} dx  finite?"""
    if profile.is_zero or profile.compact:
        return True
    net = profile.rate - growth
    if net > 0:
        return True
    if net < 0:
        return False
    q = profile.power if profile.family == "power_exponential" else 0.0
    return q - extra_power > N


def _liminf_positive(profile: CoefficientProfile, growth: float) -> bool:
    """Is  liminf profile(|x|) e^{growth |x|} >= c > 0 ?"""
    if profile.is_zero or profile.compact:
        return False
    q = profile.power if profile.family == "power_exponential" else 0.0
    if profile.rate < growth:
        return True
    return profile.rate == growth and q == 0


def classify_hypotheses(a: CoefficientProfile, b: CoefficientProfile, params: ProblemParams,
                        sigma: float) -> HypothesisReport:
    """Decide the decay hypotheses for the pair (a, b).

    alpha/beta are reported in units of sqrt(a_inf) when the fast-a
    condition holds (or nothing holds) and in units of sqrt(sigma) when
    the slow-a condition holds.  Compactly supported profiles give an
    infinite rate.
    """
    if not 0 < sigma < params.a_inf:
        raise ValidationError(f"sigma must lie in (0, a_inf) = (0, {params.a_inf}), got {sigma}")
    N, p = params.N, params.p
    sa, ss = math.sqrt(params.a_inf), math.sqrt(sigma)
    h1, h2 = _decays(a, N), _decays(b, N)

    def rate(profile, unit):
        if profile.compact:
            return math.inf
        return profile.rate / unit

    # fast-a: a integrable against e^{alpha sa r}, b bounded below by e^{-beta sa r}
    alpha3, beta3 = rate(a, sa), rate(b, sa)
    h3 = False
    if h1 and h2 and not b.compact:
        # the b-condition attains beta3 only without algebraic damping;
        # either way some admissible pair exists iff beta3 < min(2, alpha3)
        h3 = beta3 < min(2.0, alpha3)

    # slow-a: a bounded below by e^{-alpha ss r}, b integrable against e^{beta ss r}
    alpha4, beta4 = rate(a, ss), rate(b, ss)
    h4 = False
    if h1 and h2 and not a.compact:
        qa = a.power if a.family == "power_exponential" else 0.0
        if qa == 0:
            alpha_ok = alpha4 <= p + 1
        else:
            alpha_ok = alpha4 < p + 1
        if math.isinf(beta4):
            beta_ok = True
        elif qa == 0 and _weighted_integrable(b, beta4 * ss, 0.0, N):
            beta_ok = alpha4 <= beta4
        else:
            beta_ok = alpha4 < beta4
        h4 = alpha_ok and beta_ok

    h5 = h1 and _weighted_integrable(a, 2 * sa, N - 1, N)

    if h3:
        regime, alpha, beta = "fast_a", alpha3, beta3
    elif h4:
        regime, alpha, beta = "slow_a", alpha4, beta4
    else:
        regime, alpha, beta = "unclassified", alpha3, beta3
    return HypothesisReport(h1, h2, h3, h4, h5, alpha, beta, sigma, regime)
