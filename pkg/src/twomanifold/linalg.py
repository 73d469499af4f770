"""Dense linear-algebra building blocks.

Every decomposition here is deterministic: eigen/singular vectors carry a
fixed sign (largest-magnitude component positive) so that embeddings and
test fixtures are reproducible across runs.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg
import scipy.sparse

from .exceptions import InvalidInputError, ParameterError, SingularMatrixError

__all__ = [
    "SymmetricSpectrum",
    "TruncatedSvd",
    "symmetrize",
    "sym_eig",
    "sym_eig_top",
    "trunc_svd",
    "sym_inv_sqrt",
    "double_center",
    "fix_signs",
]

SYMMETRY_TOL = 1e-8

# Above this size a top-k SVD goes through a partial symmetric eigensolve of
# the smaller cross-product instead of a full LAPACK SVD.
_PARTIAL_MIN_DIM = 800
_PARTIAL_MAX_FRACTION = 8


@dataclass(frozen=True)
class SymmetricSpectrum:
    """Eigenvalues (descending) and matching unit eigenvectors (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


@dataclass(frozen=True)
class TruncatedSvd:
    """Top-k singular triple ``m ~= U diag(s) V^T``."""

    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray

    @property
    def k(self) -> int:
        return self.singular_values.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.left_vectors * self.singular_values) @ self.right_vectors.T


def _as_finite(m, name="matrix") -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return a


def fix_signs(a: np.ndarray, b: np.ndarray | None = None):
    """Flip column signs so the largest-magnitude entry is positive.

    With a second array the decision is taken on the stacked columns
    ``[a; b]`` and applied to both, which keeps paired singular vectors
    consistent and makes the convention symmetric under swapping ``a, b``.
    """
    stacked = a if b is None else np.vstack([a, b])
    if stacked.shape[1] == 0:
        return (a, b) if b is not None else a
    rows = np.argmax(np.abs(stacked), axis=0)
    signs = np.sign(stacked[rows, np.arange(stacked.shape[1])])
    signs[signs == 0] = 1.0
    if b is None:
        return a * signs
    return a * signs, b * signs


def symmetrize(m, tol: float = SYMMETRY_TOL) -> np.ndarray:
    """Return ``(m + m^T) / 2`` after checking ``m`` is symmetric up to ``tol``.

    The tolerance is absolute for matrices with entries of order one and
    scales with ``max|m|`` otherwise.
    """
    a = _as_finite(m)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if a.size and np.max(np.abs(a - a.T)) > tol * scale:
        raise InvalidInputError("matrix is not symmetric")
    return 0.5 * (a + a.T)


def sym_eig(m) -> SymmetricSpectrum:
    """Full eigendecomposition of a symmetric matrix, eigenvalues descending."""
    a = symmetrize(m)
    w, v = np.linalg.eigh(a)
    w, v = w[::-1], v[:, ::-1]
    return SymmetricSpectrum(w.copy(), fix_signs(np.ascontiguousarray(v)))


def sym_eig_top(m, k: int) -> SymmetricSpectrum:
    """The ``k`` algebraically largest eigenpairs of a symmetric matrix."""
    a = symmetrize(m)
    n = a.shape[0]
    if not 1 <= k <= n:
        raise ParameterError(f"k must lie in [1, {n}], got {k}")
    if k == n or n < _PARTIAL_MIN_DIM:
        full = sym_eig(a)
        return SymmetricSpectrum(full.eigenvalues[:k].copy(), full.eigenvectors[:, :k].copy())
    w, v = scipy.linalg.eigh(a, subset_by_index=[n - k, n - 1])
    w, v = w[::-1], v[:, ::-1]
    return SymmetricSpectrum(w.copy(), fix_signs(np.ascontiguousarray(v)))


def _full_svd(a: np.ndarray, k: int) -> TruncatedSvd:
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    u, v = fix_signs(u[:, :k], vt[:k].T)
    return TruncatedSvd(np.ascontiguousarray(u), s[:k].copy(), np.ascontiguousarray(v))


def trunc_svd(m, k: int) -> TruncatedSvd:
    """Top-``k`` singular value decomposition of a ``p x q`` matrix.

    ``m`` may be a dense array or a scipy sparse matrix. Small problems use a
    full LAPACK SVD. Large problems with ``k`` much smaller than
    ``min(p, q)`` compute the top eigenpairs of the smaller cross-product
    ``m m^T`` (or ``m^T m``) with a dense partial eigensolver and recover the
    other side by one matrix product; this falls back to the full SVD if any
    requested singular value is too small to be resolved that way.
    """
    p, q = m.shape
    if not 1 <= k <= min(p, q):
        raise ParameterError(f"k must lie in [1, {min(p, q)}], got {k}")
    sparse = scipy.sparse.issparse(m)
    if not sparse:
        m = _as_finite(m)
    elif not np.all(np.isfinite(m.data)):
        raise InvalidInputError("matrix contains non-finite entries")

    small = min(p, q)
    if small < _PARTIAL_MIN_DIM or k * _PARTIAL_MAX_FRACTION > small:
        return _full_svd(m.toarray() if sparse else m, k)

    tall = p > q
    mm = m.T if tall else m
    cross = mm @ mm.T
    cross = cross.toarray() if scipy.sparse.issparse(cross) else cross
    top = sym_eig_top(cross, k)
    lam = np.maximum(top.eigenvalues, 0.0)
    s = np.sqrt(lam)
    if s[0] == 0.0 or s[-1] < 1e-6 * s[0]:
        return _full_svd(m.toarray() if sparse else m, k)
    a = top.eigenvectors
    b = np.asarray(mm.T @ a) / s
    if tall:
        a, b = b, a
    a, b = fix_signs(a, b)
    return TruncatedSvd(np.ascontiguousarray(a), s, np.ascontiguousarray(b))


def sym_inv_sqrt(m, eta: float = 0.0) -> np.ndarray:
    """Symmetric inverse square root ``(m + eta I)^{-1/2}`` of a PSD matrix.

    Negative eigenvalues (finite-precision artefacts of nominally PSD input)
    are clamped to zero before ``eta`` is added.
    """
    if eta < 0:
        raise ParameterError(f"eta must be non-negative, got {eta}")
    spec = sym_eig(m)
    lam = np.maximum(spec.eigenvalues, 0.0) + eta
    n = lam.shape[0]
    floor = np.finfo(float).eps * n * max(float(lam[0]) if n else 0.0, 1.0) if eta == 0 else 0.0
    if n and lam[-1] <= floor:
        raise SingularMatrixError("matrix is singular; pass eta > 0 to regularize")
    v = spec.eigenvectors
    r = (v / np.sqrt(lam)) @ v.T
    return 0.5 * (r + r.T)


def _double_center_array(a: np.ndarray) -> np.ndarray:
    row = a.mean(axis=1, keepdims=True)
    # exact symmetry in, exact symmetry out
    col = row.T if np.array_equal(a, a.T) else a.mean(axis=0, keepdims=True)
    return a - row - col + row.mean()


def double_center(g):
    """Return ``H g H`` with ``H = I - 11^T / n``.

    Accepts a plain square array or a :class:`~twomanifold.kernels.GramMatrix`;
    in the latter case the result is a GramMatrix flagged as centered.
    """
    values = getattr(g, "values", None)
    if values is not None:
        return replace(g, values=_double_center_array(_as_finite(values, "Gram matrix")), centered=True)
    a = _as_finite(g)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {a.shape}")
    return _double_center_array(a)
