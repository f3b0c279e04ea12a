"""Kalman filter, fixed-interval smoother and Gaussian log-likelihood."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailureError
from .linalg import sym_solve, symmetrize

__all__ = [
    "GaussianState",
    "GaussianSequence",
    "FilterTrajectory",
    "kalman_predict",
    "kalman_update",
    "kalman_filter",
    "fixed_interval_smooth",
    "log_likelihood",
    "smooth",
]

logger = logging.getLogger(__name__)

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class GaussianState:
    mean: np.ndarray
    cov: np.ndarray

    @property
    def sd(self):
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))


@dataclass(frozen=True, eq=False)
class GaussianSequence:
    """Per-time Gaussian states stored as stacked arrays.

    ``mean`` has shape ``(N, d)`` and ``cov`` shape ``(N, d, d)``.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __len__(self):
        return self.mean.shape[0]

    def __getitem__(self, t):
        return GaussianState(self.mean[t], self.cov[t])

    @classmethod
    def empty(cls, n, d):
        return cls(np.zeros((n, d)), np.zeros((n, d, d)))


@dataclass(frozen=True, eq=False)
class FilterTrajectory:
    predicted: GaussianSequence
    filtered: GaussianSequence
    log_likelihood: float

    def __len__(self):
        return len(self.filtered)


def kalman_predict(F, GQG, mean, cov):
    return F @ mean, symmetrize(F @ cov @ F.T + GQG)


def kalman_update(H, R, y, mean, cov):
    """Condition ``N(mean, cov)`` on the scalar ``y = H x + w``, ``w ~ N(0, R)``.

    Returns the updated mean, covariance and the log predictive density of
    ``y``. A missing (NaN) ``y`` leaves the state unchanged with a zero term.
    """
    if not np.isfinite(y):
        return mean, cov, 0.0
    HV = H @ cov
    S = float(HV @ H + R)
    if not S > 0.0:
        raise NumericalFailureError(f"innovation variance {S!r} is not positive")
    K = HV / S
    e = float(y - H @ mean)
    new_mean = mean + K * e
    new_cov = symmetrize(cov - np.outer(K, HV))
    return new_mean, new_cov, -0.5 * (_LOG_2PI + np.log(S) + e * e / S)


def kalman_filter(model, init, ys):
    """Run the Kalman filter over ``ys`` (NaN marks a missing value).

    ``init`` is the distribution of ``x_0``, one step before ``ys[0]``.
    """
    model.require_gaussian("kalman_filter")
    ys = np.asarray(ys, dtype=float).reshape(-1)
    n, d = ys.size, model.state_dim
    Q = model.system_cov()
    R = model.obs_var()
    H = model.H
    pred = GaussianSequence.empty(n, d)
    filt = GaussianSequence.empty(n, d)
    mean = np.asarray(init.mean, dtype=float)
    cov = np.asarray(init.cov, dtype=float)
    ll = 0.0
    for t in range(n):
        G = model.G_at(t)
        mean, cov = kalman_predict(model.F_at(t), G @ Q @ G.T, mean, cov)
        pred.mean[t], pred.cov[t] = mean, cov
        mean, cov, term = kalman_update(H, R, ys[t], mean, cov)
        filt.mean[t], filt.cov[t] = mean, cov
        ll += term
    return FilterTrajectory(pred, filt, float(ll))


def _smoother_gain(Vf, F, P):
    """``A = Vf F^T P^{-1}``, falling back to a pseudo-inverse when P is singular."""
    try:
        return sym_solve(P, F @ Vf, what="predicted covariance").T
    except NumericalFailureError:
        warnings.warn("singular predicted covariance in smoother gain; using pseudo-inverse", RuntimeWarning, stacklevel=3)
        logger.warning("singular predicted covariance; pseudo-inverse used")
        return Vf @ F.T @ np.linalg.pinv(P)


def fixed_interval_smooth(model, trajectory):
    """Backward (Rauch-Tung-Striebel) pass over a stored filter trajectory."""
    n = len(trajectory)
    if n == 0:
        raise ValueError("cannot smooth an empty trajectory")
    pred, filt = trajectory.predicted, trajectory.filtered
    out = GaussianSequence(filt.mean.copy(), filt.cov.copy())
    for t in range(n - 2, -1, -1):
        A = _smoother_gain(filt.cov[t], model.F_at(t + 1), pred.cov[t + 1])
        out.mean[t] = filt.mean[t] + A @ (out.mean[t + 1] - pred.mean[t + 1])
        out.cov[t] = symmetrize(filt.cov[t] + A @ (out.cov[t + 1] - pred.cov[t + 1]) @ A.T)
    return out


def smooth(model, init, ys):
    """Filter then smooth; returns ``(trajectory, smoothed)``."""
    traj = kalman_filter(model, init, ys)
    if len(traj) == 0:
        return traj, GaussianSequence.empty(0, model.state_dim)
    return traj, fixed_interval_smooth(model, traj)


def log_likelihood(model, init, ys):
    """Exact Gaussian log-likelihood by prediction-error decomposition."""
    return kalman_filter(model, init, ys).log_likelihood
