"""Bootstrap particle filter and particle smoothers.

Three smoothers are built on the same forward recursion:

* fixed-lag smoothing, which resamples an ``L``-deep history of selected
  component values together with the current particles;
* two-filter smoothing, which reweights forward predictive particles by a
  kernel estimate of the backward likelihood built from a subsample of
  backward-filter particles;
* forward/backward fixed-lag averaging, which runs the fixed-lag smoother on
  the data and on the time-reversed data and averages the quantiles.

Outputs are per-time quantiles of component values at seven fixed
probability points (the Gaussian -3..3 sd points). Full ensembles are only
kept on request since ``m * N * d`` doubles quickly exceeds memory.

All randomness comes from ``numpy.random.Generator`` objects seeded through
``SeedSequence``; identical arguments give bit-identical results.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import special

from .errors import InvalidArgumentError, ParticleCollapseError

__all__ = [
    "QUANTILE_PROBS",
    "ParticleEnsemble",
    "LagBuffer",
    "QuantileSeries",
    "ParticleFilterResult",
    "weighted_quantiles",
    "resample_indices",
    "resample",
    "gaussian_sampler",
    "data_scaled_sampler",
    "pilot_boundary_priors",
    "particle_filter",
    "fixed_lag_smooth",
    "two_filter_particle_smooth",
    "fixed_lag_average_smooth",
]

QUANTILE_PROBS = (0.0013, 0.0227, 0.1587, 0.5, 0.8413, 0.9773, 0.9987)

_LOG_TINY = float(np.log(np.finfo(float).tiny))
_SCHEMES = ("stratified", "multinomial", "systematic")


@dataclass(frozen=True, eq=False)
class ParticleEnsemble:
    """``m`` weighted state vectors.

    ``seed`` and ``stream`` record where the randomness came from and are
    informational only.
    """

    particles: np.ndarray
    weights: np.ndarray
    seed: Optional[int] = None
    stream: Tuple[int, ...] = ()

    def __post_init__(self):
        p = np.atleast_2d(np.asarray(self.particles, dtype=float))
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if p.shape[0] < 1:
            raise InvalidArgumentError("an ensemble needs at least one particle")
        if w.shape[0] != p.shape[0]:
            raise InvalidArgumentError("one weight per particle is required")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise InvalidArgumentError("weights must be nonnegative and sum to 1")
        object.__setattr__(self, "particles", p)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, particles, seed=None, stream=()):
        particles = np.atleast_2d(np.asarray(particles, dtype=float))
        m = particles.shape[0]
        return cls(particles, np.full(m, 1.0 / m), seed, stream)

    @property
    def m(self):
        return self.particles.shape[0]

    @property
    def ess(self):
        return float(1.0 / np.sum(self.weights**2))

    def mean(self):
        return self.weights @ self.particles


def weighted_quantiles(values, weights=None, probs=QUANTILE_PROBS):
    """Inverted-CDF quantiles of weighted samples.

    ``values`` has shape ``(m,)`` or ``(m, k)``; the result has shape
    ``(len(probs),)`` or ``(k, len(probs))``. The quantile at ``p`` is the
    smallest sample whose cumulative weight reaches ``p``.
    """
    values = np.asarray(values, dtype=float)
    probs = np.asarray(probs, dtype=float)
    flat = values.ndim == 1
    v = values[:, None] if flat else values
    m = v.shape[0]
    w = np.full(m, 1.0 / m) if weights is None else np.asarray(weights, dtype=float)
    order = np.argsort(v, axis=0, kind="stable")
    out = np.empty((v.shape[1], probs.size))
    for k in range(v.shape[1]):
        o = order[:, k]
        cw = np.cumsum(w[o])
        idx = np.searchsorted(cw, probs * cw[-1], side="left")
        out[k] = v[o[np.minimum(idx, m - 1)], k]
    return out[0] if flat else out


@dataclass(eq=False)
class QuantileSeries:
    """Per-time quantiles and means of named component values.

    ``values[name]`` has shape ``(N, len(probs))``. ``ess`` holds the
    effective sample size of the weights behind each row, ``distinct`` the
    number of distinct particles behind each row when that is tracked.
    """

    probs: Tuple[float, ...]
    values: Dict[str, np.ndarray]
    mean: Dict[str, np.ndarray]
    ess: Optional[np.ndarray] = None
    distinct: Optional[np.ndarray] = None

    @property
    def names(self):
        return tuple(self.values)

    def __len__(self):
        return next(iter(self.values.values())).shape[0] if self.values else 0

    def __getitem__(self, name):
        return self.values[name]

    def median(self, name):
        return self.values[name][:, list(self.probs).index(0.5)]

    def is_monotone(self):
        return all(np.all(np.diff(v, axis=1) >= 0) for v in self.values.values())

    @classmethod
    def empty(cls, names, n, probs=QUANTILE_PROBS):
        return cls(
            tuple(probs),
            {k: np.full((n, len(probs)), np.nan) for k in names},
            {k: np.full(n, np.nan) for k in names},
            np.full(n, np.nan),
        )

    def set_row(self, t, comp_values, weights, ess=None):
        q = weighted_quantiles(comp_values, weights, self.probs)
        mu = weights @ comp_values
        for k, name in enumerate(self.values):
            self.values[name][t] = q[k]
            self.mean[name][t] = mu[k]
        if ess is not None:
            self.ess[t] = ess


class LagBuffer:
    """The last ``L + 1`` slices of selected component values for every particle.

    Each slice also carries the index each particle had when the slice was
    pushed, so the number of distinct ancestors behind a slice can be
    counted after any number of resampling steps.
    """

    def __init__(self, lag, m):
        if lag < 0:
            raise InvalidArgumentError("lag must be >= 0")
        self.lag = lag
        self.m = m
        self._slices = deque()

    def __len__(self):
        return len(self._slices)

    def push(self, t, values):
        values = np.asarray(values, dtype=float)
        if values.shape[0] != self.m:
            raise InvalidArgumentError("slice particle count differs from buffer")
        self._slices.append((t, values, np.arange(self.m)))

    def full(self):
        return len(self._slices) > self.lag

    def oldest(self):
        return self._slices[0]

    def pop(self):
        return self._slices.popleft()

    def slices(self):
        return list(self._slices)

    def resample(self, idx):
        self._slices = deque((t, v[idx], a[idx]) for t, v, a in self._slices)


def resample_indices(weights, rng, scheme="stratified"):
    """Ancestor indices for ``m`` draws from normalized ``weights``.

    ``multinomial`` is the plain inverse-CDF search with one independent
    uniform per draw; ``stratified`` uses one uniform in each of ``m`` equal
    strata and ``systematic`` a single shared offset.
    """
    w = np.asarray(weights, dtype=float)
    m = w.size
    cw = np.cumsum(w)
    cw /= cw[-1]
    if scheme == "multinomial":
        # u in (0, 1] so that a zero-weight leading particle is never picked
        u = 1.0 - rng.random(m)
        idx = np.searchsorted(cw, u, side="left")
    elif scheme == "stratified":
        u = (np.arange(m) + rng.random(m)) / m
        idx = np.searchsorted(cw, u, side="right")
    elif scheme == "systematic":
        u = (np.arange(m) + rng.random()) / m
        idx = np.searchsorted(cw, u, side="right")
    else:
        raise InvalidArgumentError(f"unknown resampling scheme {scheme!r}; use one of {_SCHEMES}")
    return np.minimum(idx, m - 1)


def resample(ensemble, seed, scheme="stratified"):
    """Resample an ensemble to uniform weights."""
    rng = np.random.default_rng(seed)
    idx = resample_indices(ensemble.weights, rng, scheme)
    return ParticleEnsemble.uniform(ensemble.particles[idx], ensemble.seed, ensemble.stream)


def gaussian_sampler(mean, cov):
    """Sampler for ``N(mean, cov)`` with signature ``(rng, m) -> (m, d)``."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))

    def sample(rng, m):
        return rng.multivariate_normal(mean, cov, size=m, method="eigh")

    return sample


def data_scaled_sampler(model, ys, spread=1.0):
    """Broad Gaussian prior set from the data.

    Every element of the ``trend`` block (when there is one, otherwise of the
    whole state) is centred at the sample mean of ``ys``; the covariance is
    ``spread * var(ys) * I``.
    """
    ys = np.asarray(ys, dtype=float)
    finite = ys[np.isfinite(ys)]
    mu = float(finite.mean()) if finite.size else 0.0
    v = float(finite.var()) if finite.size > 1 else 1.0
    v = v if v > 0 else 1.0
    mean = np.zeros(model.state_dim)
    if "trend" in model.component_names:
        mean[model.component("trend").block] = mu
    elif len(model.components) == 1:
        mean[:] = mu
    return gaussian_sampler(mean, spread * v * np.eye(model.state_dim))


def pilot_boundary_priors(model, ys, scale=1e7):
    """Gaussian priors for ``x_0`` and ``x_N`` from a pilot Kalman smoother.

    For linear-Gaussian models of moderate dimension a broad prior leaves
    almost no particle near the posterior, so the ensemble collapses onto
    one particle within a few steps. The pilot smoother (diffuse start)
    gives ``p(x_1 | y)``, which is carried one step back through ``F^{-1}``
    for the forward run; ``p(x_N | y)`` is carried one step forward for a
    run on the reversed model. Returns ``(forward_init, forward_sampler,
    backward_sampler)``, where ``forward_init`` is the
    :class:`~ssmsmooth.model.InitialState` to give a Kalman reference.
    """
    from .kalman import smooth
    from .linalg import invert_transition, symmetrize
    from .model import InitialState, diffuse_init

    ys = np.asarray(ys, dtype=float).reshape(-1)
    _, sm = smooth(model, diffuse_init(model, ys, scale), ys)
    n = ys.size
    G0 = model.G_at(0)
    Q0 = G0 @ model.system_cov() @ G0.T
    Fi = invert_transition(model.F_at(0))
    m0 = Fi @ sm.mean[0]
    P0 = symmetrize(Fi @ (sm.cov[0] + Q0) @ Fi.T)
    F_end = model.F_at(n - 1)
    G_end = model.G_at(n - 1)
    mN = F_end @ sm.mean[-1]
    PN = symmetrize(F_end @ sm.cov[-1] @ F_end.T + G_end @ model.system_cov() @ G_end.T)
    return InitialState(m0, P0), gaussian_sampler(m0, P0), gaussian_sampler(mN, PN)


def _select(model, components):
    names = model.component_names if components is None else tuple(components)
    for n in names:
        model.component(n)
    return names, model.extraction_matrix(names)


def _system_noise(model, rng, m):
    v = np.empty((m, model.noise_dim))
    for k, spec in enumerate(model.system_noise):
        v[:, k] = spec.sample(rng, m)
    return v


class _Bootstrap:
    """Forward bootstrap recursion shared by the filter and the smoothers.

    Each call to :meth:`step` propagates, weights and resamples once and
    returns ``(predicted, weights, ancestors)``; the weights are normalized
    and refer to the predicted particles.
    """

    def __init__(self, model, init_sampler, m, rng, scheme):
        if m < 1:
            raise InvalidArgumentError("m must be >= 1")
        if scheme not in _SCHEMES:
            raise InvalidArgumentError(f"unknown resampling scheme {scheme!r}; use one of {_SCHEMES}")
        self.model, self.m, self.rng, self.scheme = model, m, rng, scheme
        f = np.asarray(init_sampler(rng, m), dtype=float)
        if f.shape != (m, model.state_dim):
            raise InvalidArgumentError(f"init sampler returned shape {f.shape}, expected {(m, model.state_dim)}")
        self.filtered = f
        self.log_likelihood = 0.0
        self._uniform = np.full(m, 1.0 / m)

    def step(self, t, y):
        model, m = self.model, self.m
        v = _system_noise(model, self.rng, m)
        pred = self.filtered @ model.F_at(t).T + v @ model.G_at(t).T
        if not np.isfinite(y):
            self.filtered = pred
            return pred, self._uniform, np.arange(m)
        logw = model.obs_noise.logpdf(y - pred @ model.H)
        lse = special.logsumexp(logw)
        if not np.isfinite(lse):
            raise ParticleCollapseError(f"all particle weights are zero at t={t}", t)
        self.log_likelihood += float(lse - np.log(m))
        w = np.exp(logw - lse)
        w /= w.sum()
        idx = resample_indices(w, self.rng, self.scheme)
        self.filtered = pred[idx]
        return pred, w, idx


@dataclass(frozen=True, eq=False)
class ParticleFilterResult:
    predicted: QuantileSeries
    filtered: QuantileSeries
    log_likelihood: float
    ensembles: Optional[list] = field(default=None, repr=False)


def _prep(model, ys, init_sampler):
    ys = np.asarray(ys, dtype=float).reshape(-1)
    if init_sampler is None:
        init_sampler = data_scaled_sampler(model, ys)
    return ys, init_sampler


def particle_filter(
    model,
    init_sampler,
    ys,
    m,
    seed,
    scheme="stratified",
    components=None,
    keep_ensembles=False,
):
    """Bootstrap particle filter.

    Predictive quantiles come from the unweighted predictive particles and
    filter quantiles from the same particles under the normalized
    observation weights (equivalently, from the resampled set). With
    ``keep_ensembles`` a list of ``(predicted, filtered)``
    :class:`ParticleEnsemble` pairs is kept as well.

    ``init_sampler(rng, m)`` draws ``x_0``; ``None`` uses
    :func:`data_scaled_sampler`.
    """
    ys, init_sampler = _prep(model, ys, init_sampler)
    names, E = _select(model, components)
    n = ys.size
    boot = _Bootstrap(model, init_sampler, m, np.random.default_rng(seed), scheme)
    pred_q = QuantileSeries.empty(names, n)
    filt_q = QuantileSeries.empty(names, n)
    ensembles = [] if keep_ensembles else None
    uniform = np.full(m, 1.0 / m)
    for t in range(n):
        pred, w, _ = boot.step(t, ys[t])
        vals = pred @ E.T
        pred_q.set_row(t, vals, uniform, float(m))
        filt_q.set_row(t, vals, w, float(1.0 / np.sum(w**2)))
        if keep_ensembles:
            ensembles.append(
                (
                    ParticleEnsemble(pred, uniform, seed, (t,)),
                    ParticleEnsemble.uniform(boot.filtered, seed, (t,)),
                )
            )
    return ParticleFilterResult(pred_q, filt_q, boot.log_likelihood, ensembles)


def fixed_lag_smooth(
    model,
    ys,
    m,
    L,
    components=None,
    seed=0,
    init_sampler=None,
    scheme="stratified",
):
    """Fixed-lag particle smoother.

    At every step the whole lag buffer is resampled jointly with the current
    particles. Row ``t`` of the result describes ``p(x_t | y_0..y_{min(t+L, N-1)})``
    and is taken from the buffer slice for ``t`` weighted by the observation
    weights at time ``min(t + L, N - 1)``. ``distinct`` counts the distinct
    ancestors left in that slice after the final resampling.

    The random stream does not depend on ``L``, so for a fixed seed the
    ancestry of every slice is nested across lags.
    """
    ys, init_sampler = _prep(model, ys, init_sampler)
    n = ys.size
    if not 0 <= L <= max(n, 0):
        raise InvalidArgumentError(f"lag {L} outside [0, {n}]")
    names, E = _select(model, components)
    boot = _Bootstrap(model, init_sampler, m, np.random.default_rng(seed), scheme)
    out = QuantileSeries.empty(names, n)
    out.distinct = np.zeros(n, dtype=int)
    buf = LagBuffer(L, m)

    def emit(slice_, w, idx):
        t, vals, anc = slice_
        out.set_row(t, vals, w, float(1.0 / np.sum(w**2)))
        out.distinct[t] = np.count_nonzero(np.bincount(anc[idx], minlength=m))

    for t in range(n):
        pred, w, idx = boot.step(t, ys[t])
        buf.push(t, pred @ E.T)
        if buf.full():
            emit(buf.pop(), w, idx)
        if t == n - 1:
            for s in buf.slices():
                emit(s, w, idx)
        buf.resample(idx)
    return out


def _log_kernel(model, u):
    """``log q(u)`` for ``u = G^T e`` with per-factor floors; underflowing products become -inf."""
    total = np.zeros(u.shape[:-1])
    for k, spec in enumerate(model.system_noise):
        total += np.maximum(spec.logpdf(u[..., k]), _LOG_TINY)
    total[total < _LOG_TINY] = -np.inf
    return total


def two_filter_particle_smooth(
    model,
    ys,
    m,
    r,
    seed=0,
    components=None,
    init_sampler=None,
    backward_init_sampler=None,
    scheme="stratified",
    chunk=None,
):
    """Two-filter particle smoother with subsampled kernel weights.

    A backward bootstrap filter runs on the reversed model over the reversed
    data. At each time ``r`` of its filtered particles are drawn without
    replacement from a dedicated random stream, and every forward predictive
    particle ``p_j`` is weighted by

        beta_j = (1/r) sum_i q(G^T (f_i - p_j)).

    Quantiles of the reweighted predictive ensemble are returned. ``r = m``
    uses every backward particle.
    """
    ys, init_sampler = _prep(model, ys, init_sampler)
    n = ys.size
    if not 1 <= r <= m:
        raise InvalidArgumentError(f"need 1 <= r <= m, got r={r}, m={m}")
    names, E = _select(model, components)
    fwd_ss, bwd_ss, sub_ss = np.random.SeedSequence(seed).spawn(3)
    rev = model.reversed()
    ys_rev = ys[::-1]
    if backward_init_sampler is None:
        backward_init_sampler = data_scaled_sampler(rev, ys_rev)
    back = _Bootstrap(rev, backward_init_sampler, m, np.random.default_rng(bwd_ss), scheme)
    sub_rng = np.random.default_rng(sub_ss)
    subsample = np.empty((n, r, model.state_dim))
    for s in range(n):
        back.step(s, ys_rev[s])
        subsample[n - 1 - s] = back.filtered[sub_rng.choice(m, size=r, replace=False)]

    fwd = _Bootstrap(model, init_sampler, m, np.random.default_rng(fwd_ss), scheme)
    out = QuantileSeries.empty(names, n)
    step = chunk or max(1, int(4_000_000 // max(m, 1)))
    for t in range(n):
        pred, _, _ = fwd.step(t, ys[t])
        G = model.G_at(t)
        pg = pred @ G
        fg = subsample[t] @ G
        logbeta = np.full(m, -np.inf)
        for lo in range(0, r, step):
            lk = _log_kernel(model, fg[lo:lo + step, None, :] - pg[None, :, :])
            logbeta = np.logaddexp(logbeta, special.logsumexp(lk, axis=0))
        if not np.any(np.isfinite(logbeta)):
            raise ParticleCollapseError(f"all two-filter weights are zero at t={t}", t)
        w = np.exp(logbeta - logbeta.max())
        w /= w.sum()
        out.set_row(t, pred @ E.T, w, float(1.0 / np.sum(w**2)))
    return out


def fixed_lag_average_smooth(
    model,
    ys,
    m,
    L,
    seed=0,
    components=None,
    init_sampler=None,
    backward_init_sampler=None,
    backward_model=None,
    scheme="stratified",
):
    """Average of forward and time-reversed fixed-lag quantiles.

    The backward run applies :func:`fixed_lag_smooth` to the reversed data
    with ``backward_model`` (default: the reversed model ``F^{-1}``,
    ``-F^{-1} G``); its output is flipped back in time and averaged with the
    forward run quantile by quantile.
    """
    ys = np.asarray(ys, dtype=float).reshape(-1)
    fwd_ss, bwd_ss = np.random.SeedSequence(seed).spawn(2)
    bmodel = model.reversed() if backward_model is None else backward_model
    forward = fixed_lag_smooth(model, ys, m, L, components, fwd_ss, init_sampler, scheme)
    backward = fixed_lag_smooth(bmodel, ys[::-1], m, L, components, bwd_ss, backward_init_sampler, scheme)
    values = {k: 0.5 * (forward.values[k] + backward.values[k][::-1]) for k in forward.values}
    mean = {k: 0.5 * (forward.mean[k] + backward.mean[k][::-1]) for k in forward.mean}
    ess = np.minimum(forward.ess, backward.ess[::-1])
    distinct = np.minimum(forward.distinct, backward.distinct[::-1])
    return QuantileSeries(forward.probs, values, mean, ess, distinct)
