"""Maximum likelihood fit of a local level model to simulated data."""

from pathlib import Path

import numpy as np

from ssmsmooth.config import load_config
from ssmsmooth.estimate import default_params, fit

cfg = load_config(Path(__file__).resolve().parents[1] / "configs" / "local_level.ini")
rng = np.random.default_rng(0)
ys = np.cumsum(rng.standard_normal(500)) + rng.standard_normal(500)

res = fit(cfg, ys, default_params(cfg.parameters(), ys))
print(f"converged: {res.converged} after {res.n_evals} likelihood evaluations")
print(f"-log L = {res.neg_log_likelihood:.3f}")
for name, value in zip(res.params.names, res.params.values):
    print(f"{name:12s} {value:.4f}   (true value 1.0)")
