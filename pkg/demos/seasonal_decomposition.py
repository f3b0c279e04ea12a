"""Kalman smoothing of a synthetic monthly series into trend, seasonal and AR parts."""

import numpy as np

from ssmsmooth.datasets import simulate_seasonal
from ssmsmooth.decompose import from_gaussian
from ssmsmooth.kalman import smooth
from ssmsmooth.model import diffuse_init

sim = simulate_seasonal(seed=1)
model, ys = sim.model, sim.ys
traj, smoothed = smooth(model, diffuse_init(model, ys), ys)
table = from_gaussian(model, smoothed)

print(f"log-likelihood: {traj.log_likelihood:.2f}")
print(" n        y    trend (+-2 sd)          seasonal      ar")
for n in range(0, ys.size, 12):
    lo, hi = table["trend_lo2"][n], table["trend_hi2"][n]
    print(f"{n + 1:3d} {ys[n]:8.1f} {table['trend_mean'][n]:8.1f} [{lo:7.1f}, {hi:7.1f}] "
          f"{table['seasonal_mean'][n]:8.1f} {table['ar_mean'][n]:8.1f}")
err = np.abs(table["trend_mean"] - sim.components["trend"])
print(f"mean abs error of the smoothed trend against the simulated one: {err.mean():.2f}")
