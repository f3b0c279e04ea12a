"""Linear state-space models with Gaussian, Gaussian-mixture or Cauchy noise.

The model is

    x_t = F_t x_{t-1} + G_t v_t
    y_t = H x_t + w_t

with a scalar observation. ``F`` and ``G`` are stored time-invariant; an
optional ``(N, d, d)`` / ``(N, d, k)`` stack overrides them per time step.
Time indices are 0-based throughout the package: ``F_at(t)`` is the matrix
carrying ``x_{t-1}`` into ``x_t``.

Builders produce the trend, seasonal and autoregressive blocks used for
seasonal adjustment; :func:`compose` stacks them block-diagonally.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .errors import InvalidArgumentError, UnsupportedModelError
from .linalg import invert_transition

__all__ = [
    "NoiseSpec",
    "Component",
    "StateSpaceModel",
    "InitialState",
    "NonstationaryWarning",
    "build_trend_model",
    "build_seasonal_model",
    "build_ar_model",
    "build_seasonal_adjustment_model",
    "compose",
    "diffuse_init",
    "companion_matrix",
]

_WEIGHT_TOL = 1e-12


class NonstationaryWarning(UserWarning):
    """An AR block has a companion matrix with spectral radius >= 1."""


@dataclass(frozen=True)
class NoiseSpec:
    """Distribution of one scalar noise channel.

    Use the ``gaussian``, ``mixture`` and ``cauchy`` constructors rather than
    filling the fields by hand. Mixture components all have mean zero.
    """

    kind: str
    weights: tuple = (1.0,)
    variances: tuple = ()
    location: float = 0.0
    scale: float = 0.0

    def __post_init__(self):
        if self.kind == "gaussian":
            if len(self.variances) != 1 or not self.variances[0] > 0:
                raise InvalidArgumentError("gaussian noise needs one variance > 0")
        elif self.kind == "gaussian_mixture":
            w = np.asarray(self.weights, dtype=float)
            v = np.asarray(self.variances, dtype=float)
            if w.ndim != 1 or w.size == 0 or w.shape != v.shape:
                raise InvalidArgumentError("mixture weights and variances must be equal-length, non-empty")
            if np.any(w <= 0) or abs(w.sum() - 1.0) > _WEIGHT_TOL:
                raise InvalidArgumentError("mixture weights must be positive and sum to 1")
            if np.any(v <= 0):
                raise InvalidArgumentError("mixture variances must be > 0")
        elif self.kind == "cauchy":
            if not self.scale > 0:
                raise InvalidArgumentError("cauchy scale must be > 0")
        else:
            raise InvalidArgumentError(f"unknown noise kind {self.kind!r}")

    @classmethod
    def gaussian(cls, variance):
        return cls("gaussian", (1.0,), (float(variance),))

    @classmethod
    def mixture(cls, weights, variances):
        return cls("gaussian_mixture", tuple(float(w) for w in weights), tuple(float(v) for v in variances))

    @classmethod
    def cauchy(cls, scale, location=0.0):
        return cls("cauchy", (1.0,), (), float(location), float(scale))

    @property
    def is_gaussian(self):
        return self.kind == "gaussian"

    @property
    def is_gaussian_sum(self):
        """True when the density is a finite sum of zero-mean Gaussians."""
        return self.kind in ("gaussian", "gaussian_mixture")

    @property
    def variance(self):
        if self.kind == "gaussian":
            return self.variances[0]
        if self.kind == "gaussian_mixture":
            return float(np.dot(self.weights, self.variances))
        raise UnsupportedModelError("cauchy noise has no variance")

    def sample(self, rng, size):
        """Draw ``size`` iid values using the numpy Generator ``rng``."""
        if self.kind == "gaussian":
            return np.sqrt(self.variances[0]) * rng.standard_normal(size)
        if self.kind == "gaussian_mixture":
            sd = np.sqrt(np.asarray(self.variances))
            idx = rng.choice(len(sd), size=size, p=np.asarray(self.weights))
            return sd[idx] * rng.standard_normal(size)
        return self.location + self.scale * rng.standard_cauchy(size)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "gaussian":
            v = self.variances[0]
            return -0.5 * (np.log(2.0 * np.pi * v) + x * x / v)
        if self.kind == "gaussian_mixture":
            w = np.asarray(self.weights)
            v = np.asarray(self.variances)
            xe = x[..., None]
            terms = np.log(w) - 0.5 * (np.log(2.0 * np.pi * v) + xe * xe / v)
            return special.logsumexp(terms, axis=-1)
        z = (x - self.location) / self.scale
        return -np.log(np.pi * self.scale) - np.log1p(z * z)


@dataclass(frozen=True, eq=False)
class Component:
    """A named block of the state vector.

    ``row`` has length ``state_dim`` and is zero outside ``[start, stop)``;
    the component's value is ``row @ x``. ``channels`` lists the system-noise
    channels that drive the block.
    """

    name: str
    start: int
    stop: int
    row: np.ndarray
    channels: tuple = ()

    @property
    def block(self):
        return slice(self.start, self.stop)


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    """Time-invariant (by default) linear state-space model with scalar output."""

    F: np.ndarray
    G: np.ndarray
    H: np.ndarray
    system_noise: tuple
    obs_noise: NoiseSpec
    components: tuple = ()
    F_by_time: Optional[np.ndarray] = None
    G_by_time: Optional[np.ndarray] = None

    def __post_init__(self):
        F = _frozen(np.atleast_2d(self.F))
        d = F.shape[0]
        G = _frozen(np.asarray(self.G, dtype=float).reshape(d, -1))
        H = _frozen(np.asarray(self.H, dtype=float).reshape(-1))
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "system_noise", tuple(self.system_noise))
        if F.shape != (d, d):
            raise InvalidArgumentError(f"F must be square, got {F.shape}")
        if H.shape != (d,):
            raise InvalidArgumentError(f"H must have length {d}, got {H.shape}")
        if G.shape[1] != len(self.system_noise):
            raise InvalidArgumentError(
                f"G has {G.shape[1]} columns but {len(self.system_noise)} noise channels were given"
            )
        for spec in (*self.system_noise, self.obs_noise):
            if not isinstance(spec, NoiseSpec):
                raise InvalidArgumentError("noise must be given as NoiseSpec")
        if self.F_by_time is not None:
            Ft = _frozen(self.F_by_time)
            if Ft.ndim != 3 or Ft.shape[1:] != (d, d):
                raise InvalidArgumentError("F_by_time must have shape (N, d, d)")
            object.__setattr__(self, "F_by_time", Ft)
        if self.G_by_time is not None:
            Gt = _frozen(self.G_by_time)
            if Gt.ndim != 3 or Gt.shape[1:] != G.shape:
                raise InvalidArgumentError("G_by_time must have shape (N, d, k)")
            object.__setattr__(self, "G_by_time", Gt)
        comps = tuple(self.components) or (Component("state", 0, d, H.copy(), tuple(range(G.shape[1]))),)
        taken = np.zeros(d, dtype=bool)
        names = set()
        for c in comps:
            if not 0 <= c.start < c.stop <= d:
                raise InvalidArgumentError(f"component {c.name!r} range outside state")
            if taken[c.start:c.stop].any():
                raise InvalidArgumentError(f"component {c.name!r} overlaps another component")
            if c.name in names:
                raise InvalidArgumentError(f"duplicate component name {c.name!r}")
            taken[c.start:c.stop] = True
            names.add(c.name)
        object.__setattr__(self, "components", comps)

    @property
    def state_dim(self):
        return self.F.shape[0]

    @property
    def noise_dim(self):
        return self.G.shape[1]

    def F_at(self, t):
        if self.F_by_time is not None:
            return self.F_by_time[t]
        return self.F

    def G_at(self, t):
        if self.G_by_time is not None:
            return self.G_by_time[t]
        return self.G

    @property
    def is_time_invariant(self):
        return self.F_by_time is None and self.G_by_time is None

    @property
    def is_gaussian(self):
        return self.obs_noise.is_gaussian and all(s.is_gaussian for s in self.system_noise)

    @property
    def is_gaussian_sum(self):
        return self.obs_noise.is_gaussian_sum and all(s.is_gaussian_sum for s in self.system_noise)

    def component(self, name):
        for c in self.components:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def component_names(self):
        return tuple(c.name for c in self.components)

    def extraction_matrix(self, names=None):
        """Rows (one per component) mapping a state to component values."""
        comps = self.components if names is None else [self.component(n) for n in names]
        return np.array([c.row for c in comps]).reshape(len(comps), self.state_dim)

    def system_cov(self):
        """Diagonal system-noise covariance ``Q`` of a Gaussian model."""
        if not all(s.is_gaussian for s in self.system_noise):
            raise UnsupportedModelError("system noise is not Gaussian")
        return np.diag([s.variance for s in self.system_noise]).reshape(self.noise_dim, self.noise_dim)

    def obs_var(self):
        if not self.obs_noise.is_gaussian:
            raise UnsupportedModelError("observation noise is not Gaussian")
        return self.obs_noise.variance

    def require_gaussian(self, who):
        if not self.is_gaussian:
            raise UnsupportedModelError(f"{who} needs Gaussian system and observation noise")

    def system_mixture(self):
        """Joint system-noise mixture as ``(log_weights, diag_variances)``.

        Channels are independent, so the joint density is the product of the
        per-channel mixtures; components are enumerated in lexicographic
        order over channels (first channel slowest).
        """
        if not all(s.is_gaussian_sum for s in self.system_noise):
            raise UnsupportedModelError("system noise is not a Gaussian sum")
        per = [list(zip(s.weights, s.variances)) for s in self.system_noise]
        logw, variances = [], []
        for combo in itertools.product(*per):
            logw.append(float(np.sum([np.log(w) for w, _ in combo])))
            variances.append([v for _, v in combo])
        return np.array(logw), np.array(variances, dtype=float).reshape(len(logw), self.noise_dim)

    def obs_mixture(self):
        """Observation-noise mixture as ``(log_weights, variances)``."""
        if not self.obs_noise.is_gaussian_sum:
            raise UnsupportedModelError("observation noise is not a Gaussian sum")
        return np.log(np.asarray(self.obs_noise.weights)), np.asarray(self.obs_noise.variances, dtype=float)

    def with_noise(self, system_noise=None, obs_noise=None):
        return StateSpaceModel(
            self.F,
            self.G,
            self.H,
            self.system_noise if system_noise is None else tuple(system_noise),
            self.obs_noise if obs_noise is None else obs_noise,
            self.components,
            self.F_by_time,
            self.G_by_time,
        )

    def reversed(self):
        """The backward-running model ``x_t = F^{-1} x_{t+1} - F^{-1} G v``.

        For a time-varying model of length N the result is indexed in
        reversed time: its step ``s`` (s >= 1) carries original state
        ``N - s`` to ``N - s - 1``.
        """
        Finv = invert_transition(self.F)
        Fb, Gb = None, None
        if self.F_by_time is not None or self.G_by_time is not None:
            n = len(self.F_by_time if self.F_by_time is not None else self.G_by_time)
            Fb = np.empty((n, self.state_dim, self.state_dim))
            Gb = np.empty((n, self.state_dim, self.noise_dim))
            Fb[0], Gb[0] = Finv, -Finv @ self.G
            for s in range(1, n):
                Fi = invert_transition(self.F_at(n - s))
                Fb[s] = Fi
                Gb[s] = -Fi @ self.G_at(n - s)
        return StateSpaceModel(Finv, -Finv @ self.G, self.H, self.system_noise, self.obs_noise, self.components, Fb, Gb)


@dataclass(frozen=True, eq=False)
class InitialState:
    """Gaussian distribution of ``x_0`` (the state before the first observation)."""

    mean: np.ndarray
    cov: np.ndarray = field(repr=False)

    def __post_init__(self):
        mean = _frozen(np.atleast_1d(self.mean))
        cov = _frozen(np.atleast_2d(self.cov))
        d = mean.shape[0]
        if cov.shape != (d, d):
            raise InvalidArgumentError(f"covariance must be {d}x{d}")
        scale = max(np.abs(cov).max(), 1e-300)
        if np.abs(cov - cov.T).max() > 1e-10 * scale:
            raise InvalidArgumentError("initial covariance is not symmetric")
        if np.linalg.eigvalsh(cov).min() < -1e-8 * max(np.trace(cov), 1e-300):
            raise InvalidArgumentError("initial covariance is not positive semi-definite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


def diffuse_init(model, ys, scale=1e7):
    """Zero-mean prior with covariance ``scale * var(ys) * I``."""
    ys = np.asarray(ys, dtype=float)
    finite = ys[np.isfinite(ys)]
    v = float(np.var(finite)) if finite.size > 1 else 1.0
    if not v > 0:
        v = 1.0
    return InitialState(np.zeros(model.state_dim), scale * v * np.eye(model.state_dim))


def _as_noise(value, what):
    if isinstance(value, NoiseSpec):
        return value
    value = float(value)
    if value < 0:
        raise InvalidArgumentError(f"{what} must be >= 0")
    return None if value == 0 else NoiseSpec.gaussian(value)


def _single(name, F, first_channel_row, tau2, sigma2):
    """Single-block model; ``tau2 == 0`` means a deterministic block."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    d = F.shape[0]
    noise = _as_noise(tau2, "tau2")
    obs = _as_noise(sigma2, "sigma2")
    if obs is None:
        raise InvalidArgumentError("sigma2 must be > 0")
    H = np.zeros(d)
    H[0] = 1.0
    if noise is None:
        G = np.zeros((d, 0))
        system, channels = (), ()
    else:
        G = np.zeros((d, 1))
        G[first_channel_row, 0] = 1.0
        system, channels = (noise,), (0,)
    return StateSpaceModel(F, G, H, system, obs, (Component(name, 0, d, H.copy(), channels),))


def build_trend_model(order, tau2, sigma2=1.0):
    """Random-walk (order 1) or integrated random-walk (order 2) trend."""
    if order == 1:
        F = [[1.0]]
    elif order == 2:
        F = [[2.0, -1.0], [1.0, 0.0]]
    else:
        raise InvalidArgumentError(f"trend order must be 1 or 2, got {order!r}")
    return _single("trend", F, 0, tau2, sigma2)


def build_seasonal_model(period=12, tau2=1.0, sigma2=1.0):
    """Dummy-variable seasonal block: the last ``period`` effects sum to noise."""
    if not isinstance(period, (int, np.integer)) or period < 2:
        raise InvalidArgumentError(f"seasonal period must be an integer >= 2, got {period!r}")
    d = period - 1
    F = np.zeros((d, d))
    F[0, :] = -1.0
    F[1:, :-1] = np.eye(d - 1)
    return _single("seasonal", F, 0, tau2, sigma2)


def companion_matrix(coeffs):
    coeffs = np.asarray(coeffs, dtype=float).reshape(-1)
    m = coeffs.size
    F = np.zeros((m, m))
    F[0, :] = coeffs
    F[1:, :-1] = np.eye(m - 1)
    return F


def build_ar_model(coeffs, tau2=1.0, sigma2=1.0):
    """Stationary AR(m) block in companion form.

    A nonstationary coefficient vector only warns: the reversed model of a
    stationary AR block is itself explosive, and both must be representable.
    """
    coeffs = np.asarray(coeffs, dtype=float).reshape(-1)
    if coeffs.size == 0:
        raise InvalidArgumentError("AR coefficients must be non-empty")
    F = companion_matrix(coeffs)
    radius = float(np.max(np.abs(np.linalg.eigvals(F))))
    if radius >= 1.0:
        warnings.warn(f"AR companion spectral radius {radius:.4g} >= 1", NonstationaryWarning, stacklevel=2)
    return _single("ar", F, 0, tau2, sigma2)


def compose(models: Sequence[StateSpaceModel], obs_noise=None):
    """Stack component models block-diagonally and sum their outputs.

    ``obs_noise`` (a NoiseSpec or a variance) replaces the components'
    observation noise; by default the first model's is used.
    """
    models = list(models)
    if not models:
        raise InvalidArgumentError("compose needs at least one model")
    if obs_noise is None:
        obs = models[0].obs_noise
    else:
        obs = _as_noise(obs_noise, "obs_noise")
        if obs is None:
            raise InvalidArgumentError("observation noise variance must be > 0")
    d = sum(m.state_dim for m in models)
    k = sum(m.noise_dim for m in models)
    F = np.zeros((d, d))
    G = np.zeros((d, k))
    H = np.zeros(d)
    comps, system = [], []
    varying = any(not m.is_time_invariant for m in models)
    lengths = {len(m.F_by_time if m.F_by_time is not None else m.G_by_time) for m in models if not m.is_time_invariant}
    if len(lengths) > 1:
        raise InvalidArgumentError("time-varying components must share one length")
    n_t = lengths.pop() if varying else 0
    Ft = np.zeros((n_t, d, d)) if varying else None
    Gt = np.zeros((n_t, d, k)) if varying else None
    i = j = 0
    for m in models:
        di, ki = m.state_dim, m.noise_dim
        F[i:i + di, i:i + di] = m.F
        G[i:i + di, j:j + ki] = m.G
        H[i:i + di] = m.H
        if varying:
            for t in range(n_t):
                Ft[t, i:i + di, i:i + di] = m.F_at(t)
                Gt[t, i:i + di, j:j + ki] = m.G_at(t)
        for c in m.components:
            row = np.zeros(d)
            row[i:i + di] = c.row
            comps.append(Component(c.name, c.start + i, c.stop + i, row, tuple(ch + j for ch in c.channels)))
        system.extend(m.system_noise)
        i += di
        j += ki
    return StateSpaceModel(F, G, H, tuple(system), obs, tuple(comps), Ft, Gt)


def build_seasonal_adjustment_model(
    trend_tau2,
    sigma2,
    trend_order=2,
    period=12,
    seasonal_tau2=None,
    ar_coeffs=(),
    ar_tau2=None,
):
    """Trend + seasonal + AR decomposition model ``y = T + S + p + w``.

    ``period=None`` drops the seasonal block and empty ``ar_coeffs`` drops the
    AR block. Noise arguments accept a variance or a :class:`NoiseSpec`.
    """
    parts = [build_trend_model(trend_order, trend_tau2)]
    if period is not None:
        if seasonal_tau2 is None:
            raise InvalidArgumentError("seasonal_tau2 is required with a seasonal block")
        parts.append(build_seasonal_model(period, seasonal_tau2))
    if len(ar_coeffs):
        if ar_tau2 is None:
            raise InvalidArgumentError("ar_tau2 is required with an AR block")
        parts.append(build_ar_model(ar_coeffs, ar_tau2))
    return compose(parts, sigma2)
