"""Linear algebra helpers.

Every symmetric solve in the package goes through :func:`sym_solve`, so a
failure anywhere shows up with the same diagnostics.
"""

import logging

import numpy as np
import scipy.linalg as sla

from .errors import NumericalFailureError, SingularTransitionError

logger = logging.getLogger(__name__)

# Cholesky-diagonal condition proxy above which a debug line is emitted.
COND_LOG_THRESHOLD = 1e12


def symmetrize(a):
    """Return ``(a + a^T) / 2`` over the last two axes."""
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _cond_proxy(chol_diag):
    d = np.abs(chol_diag)
    lo = d.min(axis=-1)
    hi = d.max(axis=-1)
    with np.errstate(divide="ignore"):
        return np.where(lo > 0, (hi / np.where(lo > 0, lo, 1.0)) ** 2, np.inf)


def sym_solve(a, b, what="matrix"):
    """Solve ``a x = b`` for symmetric ``a`` (single matrix or a stack).

    Positive definite systems use a Cholesky factorization; symmetric
    indefinite ones fall back to an LDL^T based solve. A singular system
    raises :class:`NumericalFailureError` naming ``what``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim > 2:
        return _sym_solve_stack(a, b, what)
    try:
        c, lower = sla.cho_factor(a, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError):
        return _indefinite_solve(a, b, what)
    cond = float(_cond_proxy(np.diag(c)))
    if cond > COND_LOG_THRESHOLD:
        logger.debug("ill-conditioned %s: cond ~ %.3g", what, cond)
    return sla.cho_solve((c, lower), b, check_finite=False)


def _indefinite_solve(a, b, what):
    try:
        x = sla.solve(a, b, assume_a="sym")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailureError(f"singular {what}: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise NumericalFailureError(f"non-finite solution for {what}")
    return x


def _sym_solve_stack(a, b, what):
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        chol = None
    if chol is not None:
        cond = _cond_proxy(np.diagonal(chol, axis1=-2, axis2=-1))
        if np.any(cond > COND_LOG_THRESHOLD):
            logger.debug("ill-conditioned %s stack: max cond ~ %.3g", what, cond.max())
    try:
        x = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(f"singular {what}: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise NumericalFailureError(f"non-finite solution for {what}")
    return x


def sym_inv(a, what="matrix"):
    a = np.asarray(a, dtype=float)
    eye = np.broadcast_to(np.eye(a.shape[-1]), a.shape)
    return symmetrize(sym_solve(a, eye, what))


def invert_transition(f, rcond=1e-12):
    """Inverse of a transition matrix, or :class:`SingularTransitionError`."""
    f = np.asarray(f, dtype=float)
    s = np.linalg.svd(f, compute_uv=False)
    if s.size and (s[-1] <= rcond * s[0] or s[0] == 0.0):
        raise SingularTransitionError(
            "transition matrix is singular (smallest singular value "
            f"{s[-1]:.3g}); use backward_information_filter, which needs only F^T"
        )
    return np.linalg.inv(f)


def logdet_psd(a):
    """Log-determinant of a (stack of) symmetric positive definite matrices."""
    sign, ld = np.linalg.slogdet(a)
    if np.any(sign <= 0):
        raise NumericalFailureError("covariance is not positive definite")
    return ld
