"""Per-component decomposition tables built from smoother output."""

from __future__ import annotations

import csv
import os
import tempfile
from dataclasses import dataclass
from typing import Dict

import numpy as np

from .kalman import GaussianSequence

__all__ = ["DecompositionSeries", "from_gaussian", "from_mixtures", "from_quantiles", "write_csv"]


@dataclass(eq=False)
class DecompositionSeries:
    """Named per-time columns, e.g. ``trend_mean``, ``trend_lo2``, ``trend_q0.5``."""

    columns: Dict[str, np.ndarray]

    def __getitem__(self, name):
        return self.columns[name]

    @property
    def names(self):
        return tuple(self.columns)


def _bands(name, mean, sd):
    return {f"{name}_mean": mean, f"{name}_lo2": mean - 2.0 * sd, f"{name}_hi2": mean + 2.0 * sd}


def from_gaussian(model, seq, names=None):
    """Mean and +-2 sd bands of each component from a :class:`GaussianSequence`."""
    names = model.component_names if names is None else tuple(names)
    cols = {}
    for n in names:
        row = model.component(n).row
        mean = seq.mean @ row
        var = np.einsum("i,tij,j->t", row, seq.cov, row)
        cols.update(_bands(n, mean, np.sqrt(np.clip(var, 0.0, None))))
    return DecompositionSeries(cols)


def from_mixtures(model, mixtures, names=None):
    """Mixture mean and +-2 sd bands (from the overall mixture variance)."""
    names = model.component_names if names is None else tuple(names)
    moments = [mx.moments() for mx in mixtures]
    n = len(moments)
    mean = np.array([m.mean for m in moments]).reshape(n, model.state_dim)
    cov = np.array([m.cov for m in moments]).reshape(n, model.state_dim, model.state_dim)
    return from_gaussian(model, GaussianSequence(mean, cov), names)


def from_quantiles(qs):
    """Quantile columns ``{name}_q{p}`` at the fixed probability points."""
    cols = {}
    for n in qs.names:
        for k, p in enumerate(qs.probs):
            cols[f"{n}_q{p}"] = qs.values[n][:, k]
    return DecompositionSeries(cols)


def _fmt(x):
    return "" if not np.isfinite(x) else repr(float(x))


def write_csv(path, time, ys, decomposition: DecompositionSeries):
    """Write ``time, y`` plus every decomposition column.

    The file is written to a temporary name in the same directory and
    renamed into place, so a failure never leaves a partial table.
    """
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".ssm-", suffix=".csv", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time", "y", *decomposition.names])
            cols = [decomposition.columns[c] for c in decomposition.names]
            for i, (t, y) in enumerate(zip(time, ys)):
                w.writerow([t, _fmt(y), *(_fmt(c[i]) for c in cols)])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
