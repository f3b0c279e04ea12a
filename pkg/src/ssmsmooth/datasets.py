"""Synthetic test series.

All generators are deterministic given ``seed``. The monthly series is a
labeled synthetic stand-in for a real seasonal dataset; it is simulated from
the seasonal adjustment model itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .model import build_seasonal_adjustment_model

__all__ = [
    "PIECEWISE_LEVELS",
    "SEASONAL_AR2_PARAMS",
    "piecewise_trend_mean",
    "simulate_piecewise_trend",
    "simulate_seasonal",
    "inject_jumps",
    "SyntheticSeasonal",
]

# (first row, last row, level), 1-based inclusive rows
PIECEWISE_LEVELS = ((1, 100, 0.0), (101, 250, -1.0), (251, 350, 1.0), (351, 500, 0.0))

# Variances and AR coefficients of the trend(2) + seasonal(12) + AR(2) model
# used as generator parameters for the synthetic monthly series.
SEASONAL_AR2_PARAMS = {
    "trend_tau2": 0.17605,
    "seasonal_tau2": 0.98741e-3,
    "ar_tau2": 29.616,
    "sigma2": 29.616,
    "ar_coeffs": (1.30754, -0.47758),
}


def piecewise_trend_mean(n=500):
    phi = np.zeros(n)
    for first, last, level in PIECEWISE_LEVELS:
        phi[first - 1:min(last, n)] = level
    return phi


def simulate_piecewise_trend(seed, n=500):
    """Step-function mean with jumps at rows 101, 251 and 351 plus N(0, 1) noise."""
    rng = np.random.default_rng(seed)
    return piecewise_trend_mean(n) + rng.standard_normal(n)


@dataclass(frozen=True, eq=False)
class SyntheticSeasonal:
    ys: np.ndarray
    states: np.ndarray
    components: dict
    model: object


def _initial_state(period, ar_order, level, slope, amplitude):
    k = np.arange(period)
    # zero-sum monthly pattern
    pattern = amplitude * (np.cos(2 * np.pi * k / period) + 0.5 * np.sin(4 * np.pi * k / period))
    pattern -= pattern.mean()
    trend = np.array([level, level - slope])
    seasonal = pattern[::-1][: period - 1]
    return np.concatenate([trend, seasonal, np.zeros(ar_order)])


def simulate_seasonal(seed, n=156, period=12, params=None, level=3000.0, slope=5.0, amplitude=150.0):
    """Simulate the trend(2) + seasonal + AR model; returns :class:`SyntheticSeasonal`."""
    p = dict(SEASONAL_AR2_PARAMS if params is None else params)
    model = build_seasonal_adjustment_model(
        trend_tau2=p["trend_tau2"],
        sigma2=p["sigma2"],
        trend_order=2,
        period=period,
        seasonal_tau2=p["seasonal_tau2"],
        ar_coeffs=p["ar_coeffs"],
        ar_tau2=p["ar_tau2"],
    )
    rng = np.random.default_rng(seed)
    x = _initial_state(period, len(p["ar_coeffs"]), level, slope, amplitude)
    sd_v = np.sqrt([s.variance for s in model.system_noise])
    sd_w = np.sqrt(model.obs_var())
    states = np.empty((n, model.state_dim))
    ys = np.empty(n)
    for t in range(n):
        x = model.F @ x + model.G @ (sd_v * rng.standard_normal(model.noise_dim))
        states[t] = x
        ys[t] = model.H @ x + sd_w * rng.standard_normal()
    comps = {c.name: states @ c.row for c in model.components}
    return SyntheticSeasonal(ys, states, comps, model)


def inject_jumps(ys, up=150.0, down=100.0):
    """Shift rows 80-100 (1-based) up by ``up`` and rows 101..N down by ``down``."""
    ys = np.array(ys, dtype=float, copy=True)
    if ys.size < 101:
        raise InvalidArgumentError("inject_jumps needs at least 101 observations")
    ys[79:100] += up
    ys[100:] -= down
    return ys
