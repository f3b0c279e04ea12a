"""Two-filter smoothing for linear-Gaussian models.

Two backward passes are provided:

* a covariance-form Kalman filter on the reversed model, which needs an
  invertible ``F`` and an initial distribution at the last time point;
* an information-form filter that carries ``(U^{-1} z, U^{-1})`` and starts
  from zero information, so it needs neither ``F^{-1}`` nor an initial
  distribution.

Either is fused with the forward Kalman filter to give the smoothed states.
The information form reproduces fixed-interval smoothing exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NumericalFailureError
from .kalman import GaussianSequence, GaussianState, kalman_filter, kalman_predict, kalman_update
from .linalg import invert_transition, sym_inv, sym_solve, symmetrize

__all__ = [
    "BackwardState",
    "InformationState",
    "InformationSequence",
    "BackwardTrajectory",
    "InformationTrajectory",
    "TwoFilterResult",
    "backward_covariance_filter",
    "filter_end_init",
    "diffuse_backward_init",
    "inflate_backward_init",
    "combine_covariance",
    "backward_information_filter",
    "combine_information",
    "two_filter_smooth_covariance",
    "two_filter_smooth_information",
]

BackwardState = GaussianState


@dataclass(frozen=True, eq=False)
class InformationState:
    """``info_vec = U^{-1} z`` and ``info_mat = U^{-1}``; ``info_mat`` may be singular."""

    info_vec: np.ndarray
    info_mat: np.ndarray


@dataclass(frozen=True, eq=False)
class InformationSequence:
    info_vec: np.ndarray
    info_mat: np.ndarray

    def __len__(self):
        return self.info_vec.shape[0]

    def __getitem__(self, t):
        return InformationState(self.info_vec[t], self.info_mat[t])


@dataclass(frozen=True, eq=False)
class BackwardTrajectory:
    """Backward predicted ``(z_{t|t+1}, U_{t|t+1})`` and filtered ``(z_{t|t}, U_{t|t})``.

    The predicted entry at the last time point does not exist and is NaN.
    """

    predicted: GaussianSequence
    filtered: GaussianSequence


@dataclass(frozen=True, eq=False)
class InformationTrajectory:
    predicted: InformationSequence
    filtered: InformationSequence


@dataclass(frozen=True, eq=False)
class TwoFilterResult:
    forward: object
    backward: object
    smoothed: GaussianSequence


def _reversed_steps(model, n):
    """Yield ``(t, F_bar, G_bar)`` for t = n-2 ... 0 with inverses cached."""
    if model.is_time_invariant:
        Fi = invert_transition(model.F)
        Gb = -Fi @ model.G
        for t in range(n - 2, -1, -1):
            yield t, Fi, Gb
        return
    for t in range(n - 2, -1, -1):
        Fi = invert_transition(model.F_at(t + 1))
        yield t, Fi, -Fi @ model.G_at(t + 1)


def backward_covariance_filter(model, ys, init):
    """Kalman filter on the reversed model from the last time point down to 0.

    ``init`` is ``(z_{N|N}, U_{N|N})``, i.e. it already contains the last
    observation.
    """
    model.require_gaussian("backward_covariance_filter")
    ys = np.asarray(ys, dtype=float).reshape(-1)
    n, d = ys.size, model.state_dim
    Q, R, H = model.system_cov(), model.obs_var(), model.H
    pred = GaussianSequence.empty(n, d)
    filt = GaussianSequence.empty(n, d)
    if n == 0:
        return BackwardTrajectory(pred, filt)
    pred.mean[n - 1] = np.nan
    pred.cov[n - 1] = np.nan
    z = np.asarray(init.mean, dtype=float)
    U = np.asarray(init.cov, dtype=float)
    filt.mean[n - 1], filt.cov[n - 1] = z, U
    for t, Fb, Gb in _reversed_steps(model, n):
        z, U = kalman_predict(Fb, Gb @ Q @ Gb.T, z, U)
        pred.mean[t], pred.cov[t] = z, U
        z, U, _ = kalman_update(H, R, ys[t], z, U)
        filt.mean[t], filt.cov[t] = z, U
    return BackwardTrajectory(pred, filt)


def filter_end_init(trajectory):
    """Start the backward filter from the forward filter at the last time point."""
    last = trajectory.filtered[len(trajectory) - 1]
    return BackwardState(last.mean.copy(), last.cov.copy())


def diffuse_backward_init(model, ys, scale=1e7):
    """``N(0, scale * var(ys) * I)`` at the last time point, updated with its observation."""
    ys = np.asarray(ys, dtype=float).reshape(-1)
    finite = ys[np.isfinite(ys)]
    v = float(np.var(finite)) if finite.size > 1 else 1.0
    v = v if v > 0 else 1.0
    d = model.state_dim
    mean, cov, _ = kalman_update(model.H, model.obs_var(), ys[-1], np.zeros(d), scale * v * np.eye(d))
    return BackwardState(mean, cov)


def inflate_backward_init(init, ys, period, state_dim=None):
    """Add ``nu^2 / m`` to the diagonal of the backward initial covariance.

    ``nu^2`` is the sample variance (denominator ``period - 1``) of the last
    ``period`` observations and ``m`` the state dimension.
    """
    ys = np.asarray(ys, dtype=float).reshape(-1)
    if period < 2 or ys.size < period:
        raise InvalidArgumentError(f"need at least one full cycle of {period} observations")
    m = state_dim if state_dim is not None else init.cov.shape[0]
    last = ys[-period:]
    last = last[np.isfinite(last)]
    nu2 = float(np.var(last, ddof=1)) if last.size > 1 else 0.0
    return BackwardState(np.array(init.mean, dtype=float), init.cov + (nu2 / m) * np.eye(init.cov.shape[0]))


def combine_covariance(pred, back):
    """Fuse ``N(x_{t|t-1}, V_{t|t-1})`` with the backward filter ``N(z_{t|t}, U_{t|t})``."""
    V = np.asarray(pred.cov, dtype=float)
    Jt = sym_solve(V + back.cov, V, what="V + U")
    J = Jt.T
    mean = pred.mean + J @ (back.mean - pred.mean)
    cov = symmetrize(V - J @ V)
    return GaussianState(mean, cov)


def backward_information_filter(model, ys):
    """Backward filter in information form, started from zero information.

    Noise channels enter only through ``G``, so models whose blocks carry no
    system noise simply have fewer columns in ``G``.
    """
    model.require_gaussian("backward_information_filter")
    ys = np.asarray(ys, dtype=float).reshape(-1)
    n, d = ys.size, model.state_dim
    H = model.H
    R = model.obs_var()
    q_inv = 1.0 / np.diag(model.system_cov())
    pred = InformationSequence(np.zeros((n, d)), np.zeros((n, d, d)))
    filt = InformationSequence(np.zeros((n, d)), np.zeros((n, d, d)))
    HtH = np.outer(H, H) / R
    dvec = np.zeros(d)
    lam = np.zeros((d, d))
    for t in range(n - 1, -1, -1):
        if t < n - 1:
            F = model.F_at(t + 1)
            G = model.G_at(t + 1)
            if G.shape[1]:
                lamG = lam @ G
                M = np.diag(q_inv) + G.T @ lamG
                # L = -F^T lam G M^{-1}; pred = (F^T + L G^T) (.)
                W = sym_solve(M, np.column_stack([lamG.T @ F, G.T @ dvec]), what="information predictor")
                lam_new = F.T @ lam @ F - F.T @ lamG @ W[:, :d]
                dvec = F.T @ dvec - F.T @ lamG @ W[:, d]
                lam = symmetrize(lam_new)
            else:
                lam = symmetrize(F.T @ lam @ F)
                dvec = F.T @ dvec
        pred.info_vec[t], pred.info_mat[t] = dvec, lam
        if np.isfinite(ys[t]):
            dvec = dvec + H * (ys[t] / R)
            lam = lam + HtH
        filt.info_vec[t], filt.info_mat[t] = dvec, lam
    return InformationTrajectory(pred, filt)


def combine_information(filt, back_pred):
    """Fuse ``N(x_{t|t}, V_{t|t})`` with backward information ``(d_{t|t+1}, Lambda_{t|t+1})``.

    ``V_s = (V^{-1} + Lambda)^{-1}`` and ``x_s = V_s (V^{-1} x + d)``; the
    backward information matrix itself is never inverted.
    """
    V = np.asarray(filt.cov, dtype=float)
    try:
        Vinv = sym_inv(V, what="filtered covariance")
    except NumericalFailureError as exc:
        raise NumericalFailureError(
            f"{exc}; add a small jitter to the filtered covariance before combining"
        ) from exc
    info = Vinv + symmetrize(np.asarray(back_pred.info_mat, dtype=float))
    rhs = np.column_stack([np.eye(V.shape[0]), Vinv @ filt.mean + back_pred.info_vec])
    sol = sym_solve(info, rhs, what="smoothed information")
    return GaussianState(sol[:, -1], symmetrize(sol[:, :-1]))


def two_filter_smooth_covariance(model, init, ys, backward_init="filter", period=12, scale=1e7):
    """Smooth with the covariance-form backward filter.

    ``backward_init`` selects the distribution at the last time point:
    ``"filter"`` reuses the forward filter there, ``"inflated"`` adds the
    last-cycle variance heuristic on top, ``"diffuse"`` starts from a broad
    prior updated with the last observation. A :class:`BackwardState` may
    also be passed directly.
    """
    ys = np.asarray(ys, dtype=float).reshape(-1)
    forward = kalman_filter(model, init, ys)
    if isinstance(backward_init, GaussianState):
        b0 = backward_init
    elif backward_init == "filter":
        b0 = filter_end_init(forward)
    elif backward_init == "inflated":
        b0 = inflate_backward_init(filter_end_init(forward), ys, period, model.state_dim)
    elif backward_init == "diffuse":
        b0 = diffuse_backward_init(model, ys, scale)
    else:
        raise InvalidArgumentError(f"unknown backward_init {backward_init!r}")
    backward = backward_covariance_filter(model, ys, b0)
    n, d = ys.size, model.state_dim
    out = GaussianSequence.empty(n, d)
    for t in range(n):
        s = combine_covariance(forward.predicted[t], backward.filtered[t])
        out.mean[t], out.cov[t] = s.mean, s.cov
    return TwoFilterResult(forward, backward, out)


def two_filter_smooth_information(model, init, ys):
    """Exact smoothing via the backward information filter."""
    ys = np.asarray(ys, dtype=float).reshape(-1)
    forward = kalman_filter(model, init, ys)
    backward = backward_information_filter(model, ys)
    n, d = ys.size, model.state_dim
    out = GaussianSequence.empty(n, d)
    for t in range(n):
        s = combine_information(forward.filtered[t], backward.predicted[t])
        out.mean[t], out.cov[t] = s.mean, s.cov
    return TwoFilterResult(forward, backward, out)
