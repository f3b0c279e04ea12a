"""Gaussian-sum filtering and two-filter smoothing for mixture-noise models.

Every noise channel is a finite mixture of zero-mean Gaussians, so the
predictive, filtered and smoothed densities are Gaussian mixtures whose
components are propagated by ordinary Kalman steps. Component counts are
kept bounded by moment-preserving pairwise merging after every update.

Weights are carried as log-weights; outlying observations routinely drive
individual predictive densities below the smallest double.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy import special

from .errors import InvalidArgumentError, NumericalFailureError
from .kalman import GaussianState, kalman_predict, kalman_update
from .linalg import invert_transition, logdet_psd, symmetrize
from .twofilter import combine_covariance, inflate_backward_init

__all__ = [
    "GaussianMixtureState",
    "GaussianSumTrajectory",
    "GaussianSumSmoothResult",
    "gsum_predict",
    "gsum_filter_step",
    "reduce_mixture",
    "gsum_filter",
    "gsum_backward_filter",
    "gsum_backward_init",
    "gsum_two_filter_smooth",
    "gsum_smooth",
]

logger = logging.getLogger(__name__)

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class GaussianMixtureState:
    """Weighted Gaussian components ``sum_k w_k N(means[k], covs[k])``.

    Weights are stored normalized in log form.
    """

    log_weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def __post_init__(self):
        lw = np.asarray(self.log_weights, dtype=float).reshape(-1)
        means = np.asarray(self.means, dtype=float)
        covs = np.asarray(self.covs, dtype=float)
        if lw.size == 0:
            raise InvalidArgumentError("a mixture needs at least one component")
        if means.shape[0] != lw.size or covs.shape[0] != lw.size:
            raise InvalidArgumentError("weights, means and covs disagree on component count")
        if not np.all(np.isfinite(lw)):
            raise InvalidArgumentError("mixture log-weights must be finite")
        total = special.logsumexp(lw)
        if abs(total) > 1e-10:
            raise InvalidArgumentError(f"mixture weights sum to exp({total:.3g}), not 1")
        object.__setattr__(self, "log_weights", lw)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covs", covs)

    @classmethod
    def single(cls, mean, cov):
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        return cls(np.zeros(1), mean[None, :], np.atleast_2d(np.asarray(cov, dtype=float))[None])

    @classmethod
    def from_unnormalized(cls, log_weights, means, covs):
        lw = np.asarray(log_weights, dtype=float)
        keep = np.isfinite(lw)
        if not keep.any():
            raise NumericalFailureError("every mixture component has zero weight")
        lw = lw[keep]
        return cls(lw - special.logsumexp(lw), np.asarray(means)[keep], np.asarray(covs)[keep])

    def __len__(self):
        return self.log_weights.size

    @property
    def weights(self):
        return np.exp(self.log_weights)

    @property
    def dim(self):
        return self.means.shape[1]

    def component(self, k):
        return GaussianState(self.means[k], self.covs[k])

    def moments(self):
        """Overall mean and covariance of the mixture."""
        w = self.weights
        mean = w @ self.means
        dev = self.means - mean
        cov = np.einsum("k,kij->ij", w, self.covs) + np.einsum("k,ki,kj->ij", w, dev, dev)
        return GaussianState(mean, symmetrize(cov))


@dataclass(frozen=True, eq=False)
class GaussianSumTrajectory:
    """Per-time predicted and filtered mixtures.

    For a backward run the predicted entry at the last time point is None.
    """

    predicted: List[Optional[GaussianMixtureState]]
    filtered: List[GaussianMixtureState]
    log_likelihood: float = 0.0

    def __len__(self):
        return len(self.filtered)


@dataclass(frozen=True, eq=False)
class GaussianSumSmoothResult:
    forward: GaussianSumTrajectory
    backward: GaussianSumTrajectory
    smoothed: List[GaussianMixtureState]


def _predict(F, G, noise_logw, noise_vars, state):
    """Kalman prediction of every (noise component, state component) pair."""
    logw, means, covs = [], [], []
    for lw_i, q_i in zip(noise_logw, noise_vars):
        GQG = (G * q_i) @ G.T
        for lw_l, m_l, V_l in zip(state.log_weights, state.means, state.covs):
            m, V = kalman_predict(F, GQG, m_l, V_l)
            logw.append(lw_i + lw_l)
            means.append(m)
            covs.append(V)
    return GaussianMixtureState.from_unnormalized(logw, means, covs)


def gsum_predict(model, filt, t=0):
    """One-step prediction: ``K_v * len(filt)`` components, noise index outermost."""
    noise_logw, noise_vars = model.system_mixture()
    return _predict(model.F_at(t), model.G_at(t), noise_logw, noise_vars, filt)


def gsum_filter_step(model, pred, y):
    """Update every (observation component, predicted component) pair with ``y``.

    Returns the normalized filtered mixture and ``log p(y | past)``. A
    missing ``y`` returns ``pred`` unchanged with a zero increment.
    """
    if not np.isfinite(y):
        return pred, 0.0
    obs_logw, obs_vars = model.obs_mixture()
    H = model.H
    logw, means, covs = [], [], []
    for lb_j, s2_j in zip(obs_logw, obs_vars):
        for lg_k, m_k, V_k in zip(pred.log_weights, pred.means, pred.covs):
            m, V, term = kalman_update(H, s2_j, y, m_k, V_k)
            logw.append(lb_j + lg_k + term)
            means.append(m)
            covs.append(V)
    logw = np.array(logw)
    inc = special.logsumexp(logw)
    if not np.isfinite(inc):
        raise NumericalFailureError(f"all predictive densities vanish for y={y!r}")
    return GaussianMixtureState.from_unnormalized(logw - inc, means, covs), float(inc)


def _merge(lw_i, m_i, V_i, lw_j, m_j, V_j):
    lw = np.logaddexp(lw_i, lw_j)
    fi = np.exp(lw_i - lw)[..., None]
    fj = np.exp(lw_j - lw)[..., None]
    mean = fi * m_i + fj * m_j
    diff = m_i - m_j
    fi, fj = fi[..., None], fj[..., None]
    cov = fi * V_i + fj * V_j + fi * fj * diff[..., :, None] * diff[..., None, :]
    return lw, mean, symmetrize(cov)


def _pair_costs(w, lw, means, covs, logdets, i, js):
    """Runnalls upper bound on the KL discrimination lost by merging i with each j."""
    _, _, Vm = _merge(lw[i], means[i], covs[i], lw[js], means[js], covs[js])
    return 0.5 * ((w[i] + w[js]) * logdet_psd(Vm) - w[i] * logdets[i] - w[js] * logdets[js])


def reduce_mixture(state, M_max):
    """Greedy pairwise merging down to at most ``M_max`` components.

    At each step the pair with the smallest Runnalls cost is replaced by its
    moment-matched merge (ties go to the lowest index pair). The overall
    mixture mean and covariance are unchanged by every merge.
    """
    if M_max < 1:
        raise InvalidArgumentError("M_max must be >= 1")
    k = len(state)
    if k <= M_max:
        return state
    lw = state.log_weights.copy()
    means = state.means.copy()
    covs = state.covs.copy()
    w = np.exp(lw)
    logdets = logdet_psd(covs)
    cost = np.full((k, k), np.inf)
    for i in range(k - 1):
        js = np.arange(i + 1, k)
        cost[i, js] = _pair_costs(w, lw, means, covs, logdets, i, js)
    alive = np.ones(k, dtype=bool)
    for _ in range(k - M_max):
        flat = int(np.argmin(cost))
        i, j = divmod(flat, k)
        lw[i], means[i], covs[i] = _merge(lw[i], means[i], covs[i], lw[j], means[j], covs[j])
        w[i] = np.exp(lw[i])
        logdets[i] = logdet_psd(covs[i])
        alive[j] = False
        cost[j, :] = np.inf
        cost[:, j] = np.inf
        others = np.flatnonzero(alive)
        others = others[others != i]
        if others.size:
            c = _pair_costs(w, lw, means, covs, logdets, i, others)
            lo = others < i
            cost[others[lo], i] = c[lo]
            cost[i, others[~lo]] = c[~lo]
    return GaussianMixtureState.from_unnormalized(lw[alive], means[alive], covs[alive])


def _as_mixture(init):
    if isinstance(init, GaussianMixtureState):
        return init
    return GaussianMixtureState.single(init.mean, init.cov)


def gsum_filter(model, init, ys, M_max):
    """Gaussian-sum filter: predict, update, then reduce to ``M_max`` components."""
    ys = np.asarray(ys, dtype=float).reshape(-1)
    noise_logw, noise_vars = model.system_mixture()
    model.obs_mixture()
    state = _as_mixture(init)
    preds, filts = [], []
    ll = 0.0
    for t, y in enumerate(ys):
        pred = _predict(model.F_at(t), model.G_at(t), noise_logw, noise_vars, state)
        state, inc = gsum_filter_step(model, pred, y)
        state = reduce_mixture(state, M_max)
        preds.append(pred)
        filts.append(state)
        ll += inc
    return GaussianSumTrajectory(preds, filts, float(ll))


def gsum_backward_init(model, ys, how="diffuse", forward=None, period=12, scale=1e7, M_max=None):
    """Mixture at the last time point for :func:`gsum_backward_filter`.

    ``"diffuse"`` updates ``N(0, scale * var(ys) * I)`` with the last
    observation; ``"filter"`` reuses the forward filtered mixture there and
    ``"inflated"`` adds the last-cycle variance to each of its components.
    """
    ys = np.asarray(ys, dtype=float).reshape(-1)
    if how == "diffuse":
        finite = ys[np.isfinite(ys)]
        v = float(np.var(finite)) if finite.size > 1 else 1.0
        v = v if v > 0 else 1.0
        prior = GaussianMixtureState.single(np.zeros(model.state_dim), scale * v * np.eye(model.state_dim))
        state, _ = gsum_filter_step(model, prior, ys[-1])
    elif how in ("filter", "inflated"):
        if forward is None:
            raise InvalidArgumentError(f"backward init {how!r} needs the forward trajectory")
        state = forward.filtered[-1]
        if how == "inflated":
            covs = np.array([inflate_backward_init(state.component(k), ys, period).cov for k in range(len(state))])
            state = GaussianMixtureState(state.log_weights, state.means, covs)
    else:
        raise InvalidArgumentError(f"unknown backward init {how!r}")
    return state if M_max is None else reduce_mixture(state, M_max)


def gsum_backward_filter(model, ys, init, M_max):
    """Gaussian-sum filter on the reversed model, from the last time point down to 0.

    ``init`` is the mixture at the last time point and already includes the
    last observation.
    """
    ys = np.asarray(ys, dtype=float).reshape(-1)
    n = ys.size
    noise_logw, noise_vars = model.system_mixture()
    model.obs_mixture()
    state = _as_mixture(init)
    preds = [None] * n
    filts = [None] * n
    if n == 0:
        return GaussianSumTrajectory(preds, filts)
    filts[n - 1] = state
    Fi_static = invert_transition(model.F) if model.is_time_invariant else None
    for t in range(n - 2, -1, -1):
        Fi = Fi_static if Fi_static is not None else invert_transition(model.F_at(t + 1))
        Gb = -Fi @ model.G_at(t + 1)
        pred = _predict(Fi, Gb, noise_logw, noise_vars, state)
        state, _ = gsum_filter_step(model, pred, ys[t])
        state = reduce_mixture(state, M_max)
        preds[t] = pred
        filts[t] = state
    return GaussianSumTrajectory(preds, filts)


def _log_compat(x, V, z, U):
    """``log N(z; x, V + U)``; None when ``V + U`` is not positive definite."""
    S = V + U
    try:
        c = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        return None
    r = np.linalg.solve(c, z - x)
    return float(-0.5 * (len(x) * _LOG_2PI + r @ r) - np.log(np.diag(c)).sum())


def gsum_two_filter_smooth(forward_pred, backward_filt, M_max):
    """Fuse forward predicted and backward filtered mixtures at every time point.

    Pair ``(l, k)`` gets weight ``delta_l * gamma_k * N(z_l; x_k, V_k + U_l)``
    and is combined with the covariance-form two-filter formula.
    """
    if len(forward_pred) != len(backward_filt):
        raise InvalidArgumentError("forward and backward sequences differ in length")
    out = []
    for t, (fwd, bwd) in enumerate(zip(forward_pred, backward_filt)):
        logw, means, covs = [], [], []
        for ld, z, U in zip(bwd.log_weights, bwd.means, bwd.covs):
            for lg, x, V in zip(fwd.log_weights, fwd.means, fwd.covs):
                lc = _log_compat(x, V, z, U)
                if lc is None:
                    warnings.warn(f"singular V + U at t={t}; pair dropped", RuntimeWarning, stacklevel=2)
                    continue
                s = combine_covariance(GaussianState(x, V), GaussianState(z, U))
                logw.append(ld + lg + lc)
                means.append(s.mean)
                covs.append(s.cov)
        out.append(reduce_mixture(GaussianMixtureState.from_unnormalized(logw, means, covs), M_max))
    return out


def gsum_smooth(model, init, ys, M_max, backward_init="diffuse", period=12, scale=1e7):
    """Forward filter, backward filter and two-filter fusion in one call."""
    ys = np.asarray(ys, dtype=float).reshape(-1)
    forward = gsum_filter(model, init, ys, M_max)
    b0 = gsum_backward_init(model, ys, backward_init, forward, period, scale, M_max)
    backward = gsum_backward_filter(model, ys, b0, M_max)
    smoothed = gsum_two_filter_smooth(forward.predicted, backward.filtered, M_max)
    return GaussianSumSmoothResult(forward, backward, smoothed)
