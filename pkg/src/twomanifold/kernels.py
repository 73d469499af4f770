"""Kernel evaluation and (weighted, centered) Gram-matrix construction.

Gram matrices are stored without the ``1/n`` normalization; spectra are
rescaled by the caller wherever they are compared with covariance spectra.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .exceptions import DegenerateDataError, InvalidInputError, ParameterError
from .linalg import _double_center_array, sym_eig_top

__all__ = [
    "KernelSpec",
    "GramMatrix",
    "WeightVector",
    "as_dataset",
    "gram",
    "cross_gram",
    "median_bandwidth",
    "weighted_center",
    "save_gram",
    "load_gram",
    "kernel_pca",
]

KERNEL_KINDS = ("linear", "rbf", "precomputed")
MEDIAN_MAX_POINTS = 2000


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "linear"
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ParameterError(f"unknown kernel {self.kind!r}; expected one of {KERNEL_KINDS}")
        if self.kind == "rbf":
            if self.gamma is None or not np.isfinite(self.gamma) or self.gamma <= 0:
                raise ParameterError(f"rbf kernel needs gamma > 0, got {self.gamma}")
        elif self.gamma is not None:
            raise ParameterError(f"{self.kind} kernel takes no gamma")

    @classmethod
    def linear(cls) -> "KernelSpec":
        return cls("linear")

    @classmethod
    def rbf(cls, gamma: float) -> "KernelSpec":
        return cls("rbf", float(gamma))

    @classmethod
    def precomputed(cls) -> "KernelSpec":
        return cls("precomputed")

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.gamma is not None:
            d["gamma"] = self.gamma
        return d


@dataclass(frozen=True)
class GramMatrix:
    """Symmetric ``n x n`` Gram matrix with provenance flags."""

    values: np.ndarray
    centered: bool = False
    weighted: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise InvalidInputError(f"Gram matrix must be square, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("Gram matrix contains non-finite entries")
        scale = max(1.0, float(np.max(np.abs(v)))) if v.size else 1.0
        if v.size and np.max(np.abs(v - v.T)) > 1e-9 * scale:
            raise InvalidInputError("Gram matrix is not symmetric")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class WeightVector:
    """Diagonal of the data-weight matrix ``P``."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float).reshape(-1)
        if not np.all(np.isfinite(e)) or np.any(e <= 0):
            raise InvalidInputError("weights must be finite and strictly positive")
        object.__setattr__(self, "entries", e)

    @classmethod
    def ones(cls, n: int) -> "WeightVector":
        return cls(np.ones(n))

    def __len__(self) -> int:
        return self.entries.shape[0]


def as_dataset(x, name: str = "x") -> np.ndarray:
    """Coerce to a finite 2-d float array, one row per sample."""
    a = np.asarray(x, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-d (samples x features), got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains non-finite features")
    return a


def _mirror_upper(g: np.ndarray) -> np.ndarray:
    upper = np.triu(g)
    return upper + np.triu(g, 1).T


def _rbf(sq: np.ndarray, gamma: float) -> np.ndarray:
    return np.exp(-0.5 * gamma * np.maximum(sq, 0.0))


def gram(x, spec: KernelSpec) -> GramMatrix:
    """Uncentered Gram matrix ``G_ij = K(x_i, x_j)``.

    The RBF kernel is ``exp(-gamma * |x - x'|^2 / 2)``. Only the upper
    triangle is evaluated and mirrored, so the result is exactly symmetric.
    """
    x = as_dataset(x)
    if x.shape[0] < 2:
        raise InvalidInputError("need at least two samples")
    if spec.kind == "precomputed":
        raise ParameterError("precomputed Gram matrices are loaded from file, not evaluated")
    if spec.kind == "linear":
        g = x @ x.T
    else:
        g = _rbf(cdist(x, x, "sqeuclidean"), spec.gamma)
        np.fill_diagonal(g, 1.0)
    return GramMatrix(_mirror_upper(g))


def cross_gram(x_new, x_train, spec: KernelSpec) -> np.ndarray:
    """Kernel rows ``K(x_new_i, x_train_j)`` for out-of-sample evaluation."""
    a = as_dataset(x_new, "x_new")
    b = as_dataset(x_train, "x_train")
    if a.shape[1] != b.shape[1]:
        raise InvalidInputError(f"feature dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    if spec.kind == "linear":
        return a @ b.T
    if spec.kind == "rbf":
        return _rbf(cdist(a, b, "sqeuclidean"), spec.gamma)
    raise ParameterError("cannot evaluate a precomputed kernel on new points")


def median_bandwidth(x, seed: int = 0, max_points: int = MEDIAN_MAX_POINTS) -> float:
    """RBF bandwidth from the median pairwise distance: ``gamma = 1 / m^2``.

    With this choice the kernel argument equals ``-1/2`` at the median
    distance. Datasets larger than ``max_points`` are subsampled without
    replacement using ``seed``.
    """
    x = as_dataset(x)
    n = x.shape[0]
    if n < 2:
        raise InvalidInputError("need at least two samples")
    if n > max_points:
        idx = np.sort(np.random.default_rng(seed).choice(n, size=max_points, replace=False))
        x = x[idx]
    m = float(np.median(pdist(x)))
    if m <= 0:
        raise DegenerateDataError("median pairwise distance is zero (points coincide)")
    return 1.0 / m**2


def weighted_center(g: GramMatrix, p: WeightVector) -> GramMatrix:
    """Return ``P H G H P``: center first, weight after.

    Centering is skipped when ``g`` is already flagged as centered.
    """
    if g.weighted:
        raise InvalidInputError("Gram matrix is already weighted")
    w = p.entries
    if w.shape[0] != g.n:
        raise InvalidInputError(f"weight length {w.shape[0]} does not match Gram size {g.n}")
    b = g.values if g.centered else _double_center_array(g.values)
    c = w[:, None] * b * w[None, :]
    return GramMatrix(c, centered=True, weighted=True)


def save_gram(g: GramMatrix, path) -> None:
    """Write ``path`` (header-free CSV) and the ``.json`` status sidecar."""
    path = Path(path)
    np.savetxt(path, g.values, delimiter=",", fmt="%.17g")
    path.with_suffix(".json").write_text(
        json.dumps({"centered": g.centered, "weighted": g.weighted}, indent=2) + "\n"
    )


def load_gram(path) -> GramMatrix:
    """Read a precomputed Gram matrix and its declared centered/weighted status."""
    path = Path(path)
    values = np.loadtxt(path, delimiter=",", ndmin=2)
    sidecar = path.with_suffix(".json")
    if not sidecar.exists():
        raise InvalidInputError(f"missing status sidecar {sidecar}")
    meta = json.loads(sidecar.read_text())
    for key in ("centered", "weighted"):
        if not isinstance(meta.get(key), bool):
            raise InvalidInputError(f"sidecar {sidecar} must declare boolean {key!r}")
    return GramMatrix(values, centered=meta["centered"], weighted=meta["weighted"])


def kernel_pca(x, spec: KernelSpec, k: int):
    """One-view kernel PCA coordinates ``V_k Lambda_k^{1/2}`` of ``HGH``.

    Returns an :class:`~twomanifold.embedding.EmbeddingResult` whose
    spectrum holds the top-k eigenvalues of the centered Gram divided by
    ``n`` (the covariance-operator eigenvalues).
    """
    from .embedding import EmbeddingResult, dataset_hash

    x = as_dataset(x)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ParameterError(f"k must lie in [1, {n}], got {k}")
    c = weighted_center(gram(x, spec), WeightVector.ones(n))
    top = sym_eig_top(c.values, k)
    lam = np.maximum(top.eigenvalues, 0.0)
    return EmbeddingResult(
        coords_x=top.eigenvectors * np.sqrt(lam),
        coords_y=None,
        spectrum=lam / n,
        config={"method": "kpca", "kernel": spec.to_dict(), "k": k},
        provenance={"dataset_hash": dataset_hash(x)},
    )
