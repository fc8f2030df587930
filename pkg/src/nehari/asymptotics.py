"""Least-squares fits of exponential decay laws."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grids import Field


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class DecayFit:
    rate: float          # exponential rate with the (N-1)/2 algebraic factor removed
    power: float         # algebraic exponent from the free two-parameter fit
    d0: float            # prefactor of the compensated fit
    window: tuple


def log_linear(x, y):
    """Slope and intercept of y ~ c + s x."""
    s, c = np.polyfit(np.asarray(x, float), np.asarray(y, float), 1)
    return float(s), float(c)


def fit_rate_power(r, vals):
    """Fit log v = c - rate r - power log r; returns (rate, power, c)."""
    r = np.asarray(r, float)
    A = np.column_stack([np.ones_like(r), -r, -np.log(r)])
    coef, *_ = np.linalg.lstsq(A, np.log(vals), rcond=None)
    return float(coef[1]), float(coef[2]), float(coef[0])


def decay_window(r_max: float, a_inf: float) -> tuple[float, float]:
    pad = 5.0 / math.sqrt(a_inf)
    return pad, r_max - pad


def decay_fit(u: Field, a_inf: float, window=None) -> DecayFit:
    """Fit the tail of a positive radial field.

    The default window drops the near field and the last 5/sqrt(a_inf)
    before the Dirichlet boundary.
    """
    g = u.grid
    if g.kind != "radial":
        raise FitError("decay fits need a radial grid")
    lo, hi = window if window is not None else decay_window(g.r_max, a_inf)
    r = g.nodes
    sel = (r >= lo) & (r <= hi)
    if sel.sum() < 3:
        raise FitError(f"fit window [{lo:g}, {hi:g}] holds fewer than 3 nodes")
    v = u.values[sel]
    if np.any(v <= 0):
        raise FitError("field is not positive on the fit window")
    rs = r[sel]
    k = (g.N - 1) / 2
    slope, c = log_linear(rs, np.log(v) + k * np.log(rs))
    rate, power, _ = fit_rate_power(rs, v)
    return DecayFit(rate=-slope, power=power, d0=math.exp(c), window=(float(lo), float(hi)))
