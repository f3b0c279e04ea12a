"""Particle filtering and two-filter particle smoothing of a piecewise-constant trend."""

import numpy as np

from ssmsmooth.datasets import piecewise_trend_mean, simulate_piecewise_trend
from ssmsmooth.model import NoiseSpec, build_trend_model
from ssmsmooth.particle import data_scaled_sampler, particle_filter, two_filter_particle_smooth

ys = simulate_piecewise_trend(seed=1)
model = build_trend_model(1, NoiseSpec.cauchy(0.348), 1.022)
filt = particle_filter(model, data_scaled_sampler(model, ys), ys, 10_000, seed=0)
smoothed = two_filter_particle_smooth(model, ys, 5_000, 100, seed=0)

truth = piecewise_trend_mean(ys.size)
print(f"particle log-likelihood: {filt.log_likelihood:.2f}")
print("  n  truth  filter median  smoother median  smoother 2.3%-97.7%")
q = smoothed.values["trend"]
for n in (50, 95, 100, 101, 105, 150, 250, 251, 255, 300, 350, 351, 355, 450):
    t = n - 1
    print(f"{n:3d} {truth[t]:6.1f} {filt.filtered.median('trend')[t]:14.2f} "
          f"{smoothed.median('trend')[t]:16.2f}   [{q[t, 1]:.2f}, {q[t, 5]:.2f}]")
