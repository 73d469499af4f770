"""Instrumental-variable spectral decompositions.

Finite-dimensional paths (two-subspace PCA, RRR, CCA) operate on sample
covariances. Gram paths operate on ``n x n`` centered (optionally weighted)
Gram matrices and never touch feature vectors: a singular function on the
left is represented by coefficients ``c`` over the centered training
samples, its values at the training points are ``C_X c`` and its squared
norm is ``c^T C_X c``.

Two decomposition routes are supported for the Gram paths:

``"svd"``
    Truncated SVD of the ``n x n`` product ``A B`` (``A = C_X``, ``B = C_Y``
    for the plain problem; whitened Grams for RRR/CCA).
``"eig"``
    Eigendecomposition of ``B A``; singular values are square roots of its
    eigenvalues. For linear kernels this reproduces the SVD of the sample
    cross-covariance (scaled by ``n``).

The two coincide when ``A = B`` is positive semidefinite up to squaring of
the spectrum, and differ in general.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse

from .embedding import read_matrix_csv, write_matrix_csv
from .exceptions import InvalidInputError, NumericalConsistencyError, ParameterError
from .kernels import GramMatrix, as_dataset
from .linalg import fix_signs, sym_eig, sym_inv_sqrt, trunc_svd

__all__ = [
    "PairedDecomposition",
    "ROUTES",
    "two_subspace_pca",
    "linear_rrr",
    "linear_cca",
    "whiten_gram",
    "gram_svd",
    "gram_rrr",
    "gram_cca",
    "paired_svd",
]

ROUTES = ("svd", "eig")
NEGATIVE_TOL = 1e-10
IMAG_TOL = 1e-8


@dataclass(frozen=True)
class PairedDecomposition:
    """Top-k paired singular structure of a Gram-matrix product.

    Attributes
    ----------
    left_vectors, right_vectors : (n, k) arrays
        Unit-norm values of the left/right singular functions at the
        training points (the ``U`` and ``V`` of the SVD route).
    spectrum : (k,) array
        Singular values, non-negative and non-increasing.
    left_coeffs, right_coeffs : (n, k) arrays
        Expansion coefficients over the centered samples, normalized so
        that ``c^T A c = 1`` whenever that quadratic form is positive
        (``A`` is the left Gram of the decomposed product; analogously on
        the right).
    regularizer_eta : float
        Whitening regularizer (0 for ``gram_svd``).
    kind : str
        ``"gram_svd"``, ``"gram_rrr"`` or ``"gram_cca"``.
    route : str
        ``"svd"`` or ``"eig"``.
    """

    left_vectors: np.ndarray
    right_vectors: np.ndarray
    spectrum: np.ndarray
    left_coeffs: np.ndarray
    right_coeffs: np.ndarray
    regularizer_eta: float = 0.0
    kind: str = "gram_svd"
    route: str = "svd"

    @property
    def k(self) -> int:
        return self.spectrum.shape[0]

    @property
    def n(self) -> int:
        return self.left_vectors.shape[0]

    def select(self, cols) -> "PairedDecomposition":
        """Sub-decomposition restricted to the given component indices."""
        cols = np.asarray(cols)
        return PairedDecomposition(
            self.left_vectors[:, cols],
            self.right_vectors[:, cols],
            self.spectrum[cols],
            self.left_coeffs[:, cols],
            self.right_coeffs[:, cols],
            self.regularizer_eta,
            self.kind,
            self.route,
        )

    def swap(self) -> "PairedDecomposition":
        """The same decomposition with the roles of the two views exchanged."""
        return PairedDecomposition(
            self.right_vectors,
            self.left_vectors,
            self.spectrum,
            self.right_coeffs,
            self.left_coeffs,
            self.regularizer_eta,
            self.kind,
            self.route,
        )

    def save(self, out_dir, stem: str = "decomposition") -> None:
        """JSON (spectrum, metadata) plus one CSV per coefficient/vector matrix."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name in ("left_vectors", "right_vectors", "left_coeffs", "right_coeffs"):
            write_matrix_csv(out / f"{stem}_{name}.csv", getattr(self, name), "c")
        meta = {
            "spectrum": [float(s) for s in self.spectrum],
            "regularizer_eta": self.regularizer_eta,
            "kind": self.kind,
            "route": self.route,
        }
        (out / f"{stem}.json").write_text(json.dumps(meta, indent=2) + "\n")

    @classmethod
    def load(cls, out_dir, stem: str = "decomposition") -> "PairedDecomposition":
        out = Path(out_dir)
        meta = json.loads((out / f"{stem}.json").read_text())
        mats = {
            name: read_matrix_csv(out / f"{stem}_{name}.csv")
            for name in ("left_vectors", "right_vectors", "left_coeffs", "right_coeffs")
        }
        return cls(
            spectrum=np.array(meta["spectrum"], dtype=float),
            regularizer_eta=float(meta["regularizer_eta"]),
            kind=meta["kind"],
            route=meta["route"],
            **mats,
        )


# ---------------------------------------------------------------------------
# finite-dimensional paths


def _centered_pair(x, y):
    x = as_dataset(x, "x")
    y = as_dataset(y, "y")
    if x.shape[0] != y.shape[0]:
        raise InvalidInputError(f"paired views need the same n, got {x.shape[0]} and {y.shape[0]}")
    return x - x.mean(axis=0), y - y.mean(axis=0)


def _check_eta(eta: float, strict: bool = False) -> float:
    eta = float(eta)
    if not np.isfinite(eta) or eta < 0 or (strict and eta == 0):
        bound = "> 0" if strict else ">= 0"
        raise ParameterError(f"eta must be {bound}, got {eta}")
    return eta


def two_subspace_pca(x, y, k: int):
    """Top-k SVD of the sample cross-covariance ``(1/n) (XH)(YH)^T``.

    ``U`` spans an estimate of the signal subspace in the ``x`` observation
    space that is unbiased by noise independent across views.
    """
    xc, yc = _centered_pair(x, y)
    return trunc_svd(xc.T @ yc / xc.shape[0], k)


def linear_rrr(x, y, eta: float, k: int):
    """Reduced-rank regression of ``x`` on ``y`` as an SVD.

    Decomposes the covariance between ``x`` and the whitened instruments
    ``(Sigma_YY + eta I)^{-1/2} y``, i.e.
    ``Sigma_XY (Sigma_YY + eta I)^{-1/2}``. ``eta = 0`` is allowed when
    ``Sigma_YY`` is nonsingular.
    """
    eta = _check_eta(eta)
    xc, yc = _centered_pair(x, y)
    n = xc.shape[0]
    wy = sym_inv_sqrt(yc.T @ yc / n, eta)
    return trunc_svd((xc.T @ yc / n) @ wy, k)


def linear_cca(x, y, eta: float, k: int):
    """CCA: SVD of ``(S_XX + eta I)^{-1/2} S_XY (S_YY + eta I)^{-1/2}``.

    The singular values are the (regularized) canonical correlations.
    """
    eta = _check_eta(eta)
    xc, yc = _centered_pair(x, y)
    n = xc.shape[0]
    wx = sym_inv_sqrt(xc.T @ xc / n, eta)
    wy = sym_inv_sqrt(yc.T @ yc / n, eta)
    return trunc_svd(wx @ (xc.T @ yc / n) @ wy, k)


# ---------------------------------------------------------------------------
# Gram paths


def _gram_operand(c, name: str):
    """Unwrap a Gram operand: GramMatrix, dense array or scipy sparse matrix."""
    if isinstance(c, GramMatrix):
        if not c.centered:
            raise InvalidInputError(f"{name} must be centered (double_center or weighted_center first)")
        return c.values
    if scipy.sparse.issparse(c):
        if c.shape[0] != c.shape[1]:
            raise InvalidInputError(f"{name} must be square, got shape {c.shape}")
        return c.tocsr()
    a = np.asarray(c, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return a


def _dense(m) -> np.ndarray:
    return m.toarray() if scipy.sparse.issparse(m) else np.asarray(m)


def _matmul(a, b):
    out = a @ b
    return out.tocsr() if scipy.sparse.issparse(out) else np.asarray(out)


def _unit_columns(m: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(m, axis=0)
    return m / np.where(norms > 0, norms, 1.0)


def _function_normalize(c: np.ndarray, gram) -> np.ndarray:
    """Scale coefficient columns to unit function norm where it is positive."""
    quad = np.einsum("ij,ij->j", c, np.asarray(gram @ c))
    scale = np.ones_like(quad)
    pos = quad > 0
    scale[pos] = 1.0 / np.sqrt(quad[pos])
    return c * scale


def _check_real_nonnegative(values: np.ndarray, what: str) -> np.ndarray:
    values = np.asarray(values)
    ref = max(1.0, float(np.max(np.abs(values)))) if values.size else 1.0
    if np.iscomplexobj(values):
        if np.max(np.abs(values.imag)) > IMAG_TOL * ref:
            raise NumericalConsistencyError(f"{what} has non-negligible imaginary parts")
        values = values.real
    if values.size and values.min() < -NEGATIVE_TOL * ref:
        raise NumericalConsistencyError(f"{what} has a negative value {values.min():.3e}")
    return np.maximum(values, 0.0)


def paired_svd(a, b, k: int, route: str = "svd", *, eta: float = 0.0, kind: str = "gram_svd") -> PairedDecomposition:
    """Paired decomposition of the product ``A B`` of two square Gram operands.

    ``a`` and ``b`` may be dense arrays or scipy sparse matrices. This is
    the shared engine behind :func:`gram_svd`, :func:`gram_rrr` and
    :func:`gram_cca`; it performs no centering or validation of the Gram
    status of its inputs.
    """
    if route not in ROUTES:
        raise ParameterError(f"unknown route {route!r}; expected one of {ROUTES}")
    n = a.shape[0]
    if b.shape != a.shape:
        raise InvalidInputError(f"Gram operands differ in size: {a.shape} vs {b.shape}")
    if not 1 <= k <= n:
        raise ParameterError(f"k must lie in [1, {n}], got {k}")

    if route == "svd":
        svd = trunc_svd(_matmul(a, b), k)
        u, s, v = svd.left_vectors, svd.singular_values, svd.right_vectors
        inv = np.divide(1.0, s, out=np.zeros_like(s), where=s > 0)
        # U = A (B V / s) and V = B (A U / s): coefficients reproduce the vectors
        left = np.asarray(b @ v) * inv
        right = np.asarray(a.T @ u) * inv
    else:
        lam, vecs = np.linalg.eig(_dense(_matmul(b, a)))
        order = np.argsort(-lam.real, kind="stable")[:k]
        lam = _check_real_nonnegative(lam[order], "spectrum of C_Y C_X")
        vecs = vecs[:, order]
        if np.iscomplexobj(vecs):
            vecs = vecs.real
        s = np.sqrt(lam)
        left = _unit_columns(vecs)
        right = np.asarray(a @ left)
        u = _unit_columns(np.asarray(a @ left))
        v = _unit_columns(np.asarray(b @ right))

    u, v = fix_signs(u, v)
    # re-derive coefficient signs from the (sign-fixed) vectors
    flip_l = np.sign(np.einsum("ij,ij->j", u, np.asarray(a @ left)))
    flip_r = np.sign(np.einsum("ij,ij->j", v, np.asarray(b @ right)))
    flip_l[flip_l == 0] = 1.0
    flip_r[flip_r == 0] = 1.0
    left = _function_normalize(left * flip_l, a)
    right = _function_normalize(right * flip_r, b)
    return PairedDecomposition(
        np.ascontiguousarray(u),
        np.ascontiguousarray(v),
        np.asarray(s, dtype=float).copy(),
        np.ascontiguousarray(left),
        np.ascontiguousarray(right),
        float(eta),
        kind,
        route,
    )


def whiten_gram(c, eta: float) -> np.ndarray:
    """``C (C^2 + eta I)^{-1} C`` through the eigendecomposition of ``C``.

    Eigenvalues map to ``lambda^2 / (lambda^2 + eta)`` in ``[0, 1)``, so the
    result is positive semidefinite for any symmetric ``C``.
    """
    eta = _check_eta(eta, strict=True)
    spec = sym_eig(_dense(_gram_operand(c, "c")))
    lam2 = spec.eigenvalues**2
    f = lam2 / (lam2 + eta)
    v = spec.eigenvectors
    w = (v * f) @ v.T
    return 0.5 * (w + w.T)


def gram_svd(c_x, c_y, k: int, route: str = "svd") -> PairedDecomposition:
    """Kernel SVD of the cross-covariance operator through Gram matrices.

    Parameters
    ----------
    c_x, c_y : GramMatrix or array_like
        Centered (optionally weighted) ``n x n`` Grams of the two views.
    k : int
        Number of components.
    route : {"svd", "eig"}
        ``"svd"`` decomposes ``C_X C_Y`` directly; ``"eig"`` takes square
        roots of the eigenvalues of ``C_Y C_X``.
    """
    a = _gram_operand(c_x, "c_x")
    b = _gram_operand(c_y, "c_y")
    return paired_svd(a, b, k, route, kind="gram_svd")


def gram_rrr(c_x, c_y, eta: float, k: int, route: str = "svd") -> PairedDecomposition:
    """Kernel reduced-rank regression: ``C_X C_Y (C_Y^2 + eta I)^{-1} C_Y``."""
    eta = _check_eta(eta, strict=True)
    a = _dense(_gram_operand(c_x, "c_x"))
    b = whiten_gram(_gram_operand(c_y, "c_y"), eta)
    return paired_svd(a, b, k, route, eta=eta, kind="gram_rrr")


def gram_cca(c_x, c_y, eta: float, k: int, route: str = "svd") -> PairedDecomposition:
    """Kernel CCA: ``C_X (C_X^2 + eta I)^{-1} C_X C_Y (C_Y^2 + eta I)^{-1} C_Y``.

    Singular values lie in ``[0, 1)``; for linear kernels and small ``eta``
    they approach the canonical correlations.
    """
    eta = _check_eta(eta, strict=True)
    a = whiten_gram(_gram_operand(c_x, "c_x"), eta)
    b = whiten_gram(_gram_operand(c_y, "c_y"), eta)
    return paired_svd(a, b, k, route, eta=eta, kind="gram_cca")
