"""Embedding- and subspace-quality metrics."""
from __future__ import annotations

import numpy as np
import scipy.linalg

from .exceptions import DegenerateDataError, InvalidInputError

__all__ = ["procrustes_error", "standardize_latent", "scaled_procrustes_error", "principal_angles", "rmse"]

_RANK_TOL = 1e-10


def _pair(e, z):
    e = np.asarray(e, dtype=float)
    z = np.asarray(z, dtype=float)
    if e.ndim == 1:
        e = e[:, None]
    if z.ndim == 1:
        z = z[:, None]
    if e.shape != z.shape:
        raise InvalidInputError(f"shape mismatch: {e.shape} vs {z.shape}")
    if not (np.all(np.isfinite(e)) and np.all(np.isfinite(z))):
        raise InvalidInputError("non-finite coordinates")
    return e, z


def procrustes_error(e, z) -> float:
    """Root-mean-square residual of the best similarity fit of ``e`` onto ``z``.

    Minimizes ``sqrt(mean_i |s R e_i + t - z_i|^2)`` over translations ``t``,
    orthogonal ``R`` (reflections allowed) and scales ``s > 0``. The error
    is in the units of ``z``.
    """
    e, z = _pair(e, z)
    ec = e - e.mean(axis=0)
    zc = z - z.mean(axis=0)
    ee = float(np.sum(ec**2))
    if ee <= 0 or float(np.sum(zc**2)) <= 0:
        raise DegenerateDataError("Procrustes fit needs non-constant coordinates on both sides")
    u, s, vt = np.linalg.svd(ec.T @ zc)
    r = u @ vt
    scale = s.sum() / ee
    resid = zc - scale * ec @ r
    return float(np.sqrt(np.mean(np.sum(resid**2, axis=1))))


def standardize_latent(z) -> np.ndarray:
    """Center, scale each column to unit variance, then divide by ``sqrt(k)``.

    The result has unit root-mean-square row norm, so a Procrustes error
    against it lies in ``[0, 1]`` (1 = nothing explained).
    """
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    sd = z.std(axis=0)
    if np.any(sd <= 0):
        raise DegenerateDataError("latent coordinate with zero variance")
    return (z - z.mean(axis=0)) / sd / np.sqrt(z.shape[1])


def scaled_procrustes_error(e, z) -> float:
    """:func:`procrustes_error` against the standardized latent coordinates."""
    return procrustes_error(e, standardize_latent(z))


def _orth(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    s = np.linalg.svd(a, compute_uv=False)
    if s.size == 0 or s[-1] <= _RANK_TOL * max(1.0, s[0]):
        raise DegenerateDataError(f"{name} is rank-deficient")
    return scipy.linalg.orth(a)


def principal_angles(u, m) -> np.ndarray:
    """Principal angles between ``span(u)`` (``d x k``) and ``span(m)`` (``d x k'``).

    Both inputs are orthonormalized internally; ``k <= k'``. Returns ``k``
    angles in ``[0, pi/2]``, ascending.
    """
    qu = _orth(u, "u")
    qm = _orth(m, "m")
    if qu.shape[0] != qm.shape[0]:
        raise InvalidInputError(f"ambient dimensions differ: {qu.shape[0]} vs {qm.shape[0]}")
    if qu.shape[1] > qm.shape[1]:
        raise InvalidInputError("u must not have more columns than m")
    return np.sort(scipy.linalg.subspace_angles(qu, qm))


def rmse(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    return float(np.sqrt(np.mean(np.sum((pred - truth) ** 2, axis=1))))
