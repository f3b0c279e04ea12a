"""Maximum-likelihood estimation of model hyperparameters.

Variances (and Cauchy scales) are optimized on the log scale. AR
coefficients are mapped to partial autocorrelations in (-1, 1) and then to
the real line, so every point the optimizer visits is a stationary AR model.
The likelihood is exact for Gaussian models (Kalman filter) and the
Gaussian-sum approximation for mixture noise.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import optimize

from .errors import InvalidArgumentError, NumericalFailureError, SSMError
from .gsum import gsum_filter
from .kalman import log_likelihood
from .model import diffuse_init

__all__ = [
    "ParamVector",
    "FitOptions",
    "FitResult",
    "parcor_to_ar",
    "ar_to_parcor",
    "neg_log_likelihood",
    "default_params",
    "fit",
    "PENALTY",
]

logger = logging.getLogger(__name__)

PENALTY = 1e12

POSITIVE = "positive"
AR = "ar"


def parcor_to_ar(phi):
    """Durbin-Levinson map from partial autocorrelations to AR coefficients."""
    phi = np.asarray(phi, dtype=float).reshape(-1)
    a = np.zeros(0)
    for k, p in enumerate(phi):
        a = np.append(a - p * a[::-1], p) if k else np.array([p])
    return a


def ar_to_parcor(a):
    """Inverse of :func:`parcor_to_ar`; fails outside the stationary region."""
    a = np.asarray(a, dtype=float).reshape(-1).copy()
    phi = np.zeros(a.size)
    for k in range(a.size - 1, -1, -1):
        p = a[k]
        if not abs(p) < 1.0:
            raise InvalidArgumentError(f"AR coefficients {a!r} are not stationary")
        phi[k] = p
        a = (a[:k] + p * a[:k][::-1]) / (1.0 - p * p)
    return phi


def _kind_of(name):
    return AR if name.rsplit(".", 1)[0].endswith("coeffs") else POSITIVE


@dataclass(frozen=True, eq=False)
class ParamVector:
    """Named model parameters with a flag for those held fixed.

    ``kinds`` is ``"positive"`` (log transform) or ``"ar"`` (partial
    autocorrelation transform, applied jointly to all AR entries).
    """

    names: Tuple[str, ...]
    values: np.ndarray
    fixed: Tuple[bool, ...] = ()
    kinds: Tuple[str, ...] = ()

    def __post_init__(self):
        names = tuple(self.names)
        values = np.asarray(self.values, dtype=float).reshape(-1)
        fixed = tuple(bool(f) for f in self.fixed) or (False,) * len(names)
        kinds = tuple(self.kinds) or tuple(_kind_of(n) for n in names)
        if not (len(names) == values.size == len(fixed) == len(kinds)):
            raise InvalidArgumentError("names, values, fixed and kinds must have equal length")
        if len(set(names)) != len(names):
            raise InvalidArgumentError("parameter names must be unique")
        for n, v, k in zip(names, values, kinds):
            if k == POSITIVE and not v > 0:
                raise InvalidArgumentError(f"{n} must be > 0, got {v!r}")
            if k not in (POSITIVE, AR):
                raise InvalidArgumentError(f"unknown parameter kind {k!r}")
        ar_fixed = {f for f, k in zip(fixed, kinds) if k == AR}
        if len(ar_fixed) > 1:
            raise InvalidArgumentError("AR coefficients must be all fixed or all free")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "fixed", fixed)
        object.__setattr__(self, "kinds", kinds)

    def __len__(self):
        return len(self.names)

    def __getitem__(self, name):
        return float(self.values[self.names.index(name)])

    def __eq__(self, other):
        if not isinstance(other, ParamVector):
            return NotImplemented
        return (
            self.names == other.names
            and self.fixed == other.fixed
            and self.kinds == other.kinds
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    def as_dict(self):
        return dict(zip(self.names, self.values.tolist()))

    @property
    def free_names(self):
        return tuple(n for n, f in zip(self.names, self.fixed) if not f)

    def _free_masks(self):
        free = ~np.array(self.fixed, dtype=bool)
        kinds = np.array(self.kinds)
        return free & (kinds == POSITIVE), free & (kinds == AR)

    def transform(self):
        """Unconstrained coordinates of the free parameters.

        Positive entries come first (in name order), then the AR block.
        """
        pos, ar = self._free_masks()
        u = [np.log(self.values[pos])]
        if ar.any():
            phi = ar_to_parcor(self.values[ar])
            u.append(phi / np.sqrt(1.0 - phi * phi))
        return np.concatenate(u)

    def untransform(self, u):
        """New vector with the free parameters set from coordinates ``u``."""
        u = np.asarray(u, dtype=float).reshape(-1)
        pos, ar = self._free_masks()
        n_pos = int(pos.sum())
        if u.size != n_pos + int(ar.sum()):
            raise InvalidArgumentError(f"expected {n_pos + int(ar.sum())} coordinates, got {u.size}")
        values = self.values.copy()
        values[pos] = np.exp(u[:n_pos])
        if ar.any():
            r = u[n_pos:]
            values[ar] = parcor_to_ar(r / np.sqrt(1.0 + r * r))
        return ParamVector(self.names, values, self.fixed, self.kinds)

    def with_values(self, **updates):
        values = self.values.copy()
        for k, v in updates.items():
            values[self.names.index(k)] = v
        return ParamVector(self.names, values, self.fixed, self.kinds)


def _build(model_template, params):
    if callable(model_template):
        return model_template(params)
    return model_template.with_parameters(params).build()


def neg_log_likelihood(params, model_template, ys, init=None, M_max=6, init_scale=1e7):
    """``-log p(ys)`` of the model built from ``params``.

    ``model_template`` is either a callable ``params -> StateSpaceModel`` or
    an object with ``with_parameters(params).build()`` (see
    :class:`ssmsmooth.config.ModelConfig`). ``init`` defaults to the diffuse
    prior scaled by ``var(ys)``. Gaussian models use the Kalman likelihood,
    Gaussian-sum models the Gaussian-sum filter with ``M_max`` components.
    A numerical failure returns :data:`PENALTY`.
    """
    ys = np.asarray(ys, dtype=float).reshape(-1)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model = _build(model_template, params)
        x0 = diffuse_init(model, ys, init_scale) if init is None else init
        if model.is_gaussian:
            ll = log_likelihood(model, x0, ys)
        elif model.is_gaussian_sum:
            ll = gsum_filter(model, x0, ys, M_max).log_likelihood
        else:
            raise InvalidArgumentError("maximum likelihood needs Gaussian or Gaussian-mixture noise")
    except (NumericalFailureError, np.linalg.LinAlgError, FloatingPointError) as exc:
        logger.warning("likelihood evaluation failed (%s); returning penalty", exc)
        return PENALTY
    if not np.isfinite(ll):
        logger.warning("non-finite log-likelihood; returning penalty")
        return PENALTY
    return -float(ll)


def default_params(params, ys):
    """Data-scaled starting point for the free parameters.

    Observation variances start at ``var(ys)/2``, every other variance at
    ``var(ys)/100`` and AR partial autocorrelations at zero. Fixed entries
    keep their values.
    """
    ys = np.asarray(ys, dtype=float)
    v = float(np.nanvar(ys))
    v = v if v > 0 else 1.0
    values = params.values.copy()
    for i, (n, f, k) in enumerate(zip(params.names, params.fixed, params.kinds)):
        if f:
            continue
        if k == AR:
            values[i] = 0.0
        elif n.startswith("obs."):
            values[i] = v / 2.0
        else:
            values[i] = v / 100.0
    return ParamVector(params.names, values, params.fixed, params.kinds)


@dataclass(frozen=True)
class FitOptions:
    max_evals: int = 2000
    fatol: float = 1e-8
    M_max: int = 6
    init_scale: float = 1e7


@dataclass(frozen=True, eq=False)
class FitResult:
    params: ParamVector
    neg_log_likelihood: float
    converged: bool
    n_evals: int
    message: str
    trace: List[Tuple[np.ndarray, float]] = field(repr=False, default_factory=list)


def fit(model_template, ys, init, options=None, x0=None):
    """Nelder-Mead search over the free parameters in transformed space.

    Every likelihood evaluation is recorded in ``trace``; the best point seen
    (the starting point included) is returned, so the result is never worse
    than ``init``. Hitting ``max_evals`` returns the best point with
    ``converged=False``.
    """
    opts = options or FitOptions()
    ys = np.asarray(ys, dtype=float).reshape(-1)
    if init is None:
        raise InvalidArgumentError("fit needs an initial ParamVector")
    trace = []

    def objective(u):
        try:
            p = init.untransform(u)
        except SSMError:
            val = PENALTY
        else:
            val = neg_log_likelihood(p, model_template, ys, x0, opts.M_max, opts.init_scale)
        trace.append((np.array(u, dtype=float), val))
        return val

    u0 = init.transform()
    if u0.size == 0:
        val = objective(u0)
        return FitResult(init, val, True, 1, "no free parameters", trace)
    res = optimize.minimize(
        objective,
        u0,
        method="Nelder-Mead",
        options={"maxfev": opts.max_evals, "fatol": opts.fatol, "xatol": np.inf, "adaptive": False},
    )
    best_u, best_val = min(trace, key=lambda e: e[1])
    converged = bool(res.success) and len(trace) < opts.max_evals
    message = str(res.message)
    if not converged:
        logger.warning("fit did not converge: %s", message)
    return FitResult(init.untransform(best_u), float(best_val), converged, len(trace), message, trace)
