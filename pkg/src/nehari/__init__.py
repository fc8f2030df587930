"""Nehari-manifold ground states for -Lap u + (a_inf + lam a) u = (b_inf + b) |u|^{p-1} u."""
from .coefficients import (CoefficientProfile, HypothesisReport, ProblemParams, ValidationError,
                           classify_hypotheses, eval_coefficient)
from .grids import BoxGrid, Field, RadialGrid, h1_products, integrate, lp_norm
from .energy import (EnergyBreakdown, NehariProjection, energy, energy_gradient, nehari_residual,
                     project, reduced_energy)
from .limit_problem import LimitGroundState, big_m, m_infinity, solve_limit

__version__ = "0.1.0"
