"""Instrumental Eigenmaps: denoised embeddings from two paired views.

Each view contributes a centered Gram matrix ``B`` and data weights ``P``
(kernel views: ``B = HGH``, ``P = 1``; graph views: ``B = W - S``,
``P = S^{-1/2}``). The weighted Grams ``C = P B P`` of the two views are
multiplied and decomposed; the embeddings are

    E_X = P_X^{1/2} U Lambda^{1/2},    E_Y = P_Y^{1/2} V Lambda^{1/2}

(``scaling="paper"``), or with ``P`` in place of ``P^{1/2}``
(``scaling="classic"``, the generalized-eigenvector convention of
Laplacian Eigenmaps).

Graph operators are shifted by ``graph_shift * I`` before the product.
``C + I = S^{-1/2} W S^{-1/2}`` has the same eigenvectors as ``C`` but
orders them from smooth to rough, so the leading singular vectors of the
product are the smooth (low-frequency) directions, led by the trivial
``S^{1/2} 1`` direction that ``drop_first`` discards. With
``graph_shift=0`` the product of the raw LE matrices is decomposed, whose
leading singular vectors are the roughest directions of both graphs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse

from .embedding import EmbeddingResult, dataset_hash
from .exceptions import ConfigError, InvalidInputError, ParameterError
from .graph import SCALINGS, WEIGHT_MODES, knn_adjacency, normalized_adjacency
from .kernels import GramMatrix, KernelSpec, WeightVector, as_dataset, cross_gram, gram, weighted_center
from .linalg import _double_center_array
from .spectral_iv import ROUTES, PairedDecomposition, paired_svd, whiten_gram

WHITENINGS = ("none", "rrr", "cca")

__all__ = [
    "GraphSource",
    "TwoManifoldConfig",
    "ViewOperator",
    "TwoManifoldFit",
    "build_view",
    "fit_two_manifold",
    "instrumental_eigenmaps",
    "source_from_dict",
]


@dataclass(frozen=True)
class GraphSource:
    """Laplacian-Eigenmaps view: a kNN graph on the raw observations."""

    k_nn: int = 5
    weight_mode: str = "binary"
    gamma: float | None = None

    def __post_init__(self):
        if int(self.k_nn) < 1:
            raise ConfigError(f"k_nn must be >= 1, got {self.k_nn}")
        if self.weight_mode not in WEIGHT_MODES:
            raise ConfigError(f"unknown weight mode {self.weight_mode!r}")
        if self.gamma is not None and not self.gamma > 0:
            raise ConfigError(f"heat-kernel gamma must be positive, got {self.gamma}")

    def to_dict(self) -> dict:
        d = {"kind": "graph", "k_nn": int(self.k_nn), "weight_mode": self.weight_mode}
        if self.gamma is not None:
            d["gamma"] = self.gamma
        return d


def source_from_dict(d: dict):
    """Inverse of ``to_dict`` for :class:`GraphSource` and :class:`KernelSpec`."""
    d = dict(d)
    kind = d.pop("kind", None)
    if kind == "graph":
        return GraphSource(**d)
    if kind in ("linear", "rbf", "precomputed"):
        try:
            return KernelSpec(kind, d.pop("gamma", None))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown view source kind {kind!r}")


@dataclass(frozen=True)
class TwoManifoldConfig:
    """Settings of one Instrumental Eigenmaps run.

    ``drop_first=None`` resolves to ``True`` when either view is a graph
    (the trivial constant direction leads the spectrum) and ``False``
    otherwise. ``whitening="rrr"`` replaces the ``y`` operator by
    ``C_Y (C_Y^2 + eta I)^{-1} C_Y`` (kernel reduced-rank regression);
    ``"cca"`` whitens both operators (kernel CCA).
    """

    view_x: KernelSpec | GraphSource = field(default_factory=GraphSource)
    view_y: KernelSpec | GraphSource = field(default_factory=GraphSource)
    k: int = 2
    route: str = "svd"
    scaling: str = "paper"
    drop_first: bool | None = None
    graph_shift: float = 1.0
    whitening: str = "none"
    eta: float = 1e-4

    def __post_init__(self):
        for name in ("view_x", "view_y"):
            if not isinstance(getattr(self, name), (KernelSpec, GraphSource)):
                raise ConfigError(f"{name} must be a KernelSpec or GraphSource")
        if int(self.k) < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.route not in ROUTES:
            raise ConfigError(f"unknown route {self.route!r}; expected one of {ROUTES}")
        if self.scaling not in SCALINGS:
            raise ConfigError(f"unknown scaling {self.scaling!r}; expected one of {SCALINGS}")
        if not np.isfinite(self.graph_shift):
            raise ConfigError("graph_shift must be finite")
        if self.whitening not in WHITENINGS:
            raise ConfigError(f"unknown whitening {self.whitening!r}; expected one of {WHITENINGS}")
        if not (np.isfinite(self.eta) and self.eta > 0):
            raise ConfigError(f"eta must be positive, got {self.eta}")

    @property
    def resolved_drop_first(self) -> bool:
        if self.drop_first is not None:
            return bool(self.drop_first)
        return isinstance(self.view_x, GraphSource) or isinstance(self.view_y, GraphSource)

    def to_dict(self) -> dict:
        return {
            "view_x": self.view_x.to_dict(),
            "view_y": self.view_y.to_dict(),
            "k": int(self.k),
            "route": self.route,
            "scaling": self.scaling,
            "drop_first": self.resolved_drop_first,
            "graph_shift": float(self.graph_shift),
            "whitening": self.whitening,
            "eta": float(self.eta),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TwoManifoldConfig":
        d = dict(d)
        for name in ("view_x", "view_y"):
            if name in d:
                d[name] = source_from_dict(d[name])
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown two-manifold config keys {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class ViewOperator:
    """The weighted Gram operator of one view and what is needed to extend it.

    ``operator`` is dense for kernel views and scipy-sparse for graph views.
    """

    operator: object
    weights: np.ndarray
    source: object
    train: np.ndarray | None = None
    col_means: np.ndarray | None = None
    grand_mean: float | None = None


def build_view(data, source, graph_shift: float = 1.0) -> ViewOperator:
    """Weighted centered Gram operator ``C = P B P`` for one view.

    ``data`` is the raw dataset, or a :class:`GramMatrix` when ``source`` is
    ``KernelSpec.precomputed()``. Uncentered precomputed Grams are
    double-centered; weighted ones are used as given with unit weights.
    """
    if isinstance(source, GraphSource):
        graph = knn_adjacency(data, int(source.k_nn), source.weight_mode, source.gamma)
        op = normalized_adjacency(graph)
        if graph_shift != 1.0:
            op = (op + (graph_shift - 1.0) * scipy.sparse.identity(graph.n, format="csr")).tocsr()
        return ViewOperator(op, 1.0 / np.sqrt(graph.degrees), source)
    if not isinstance(source, KernelSpec):
        raise ConfigError(f"unsupported view source {source!r}")
    if source.kind == "precomputed":
        if not isinstance(data, GramMatrix):
            raise InvalidInputError("a precomputed view expects a GramMatrix")
        if data.weighted:
            return ViewOperator(data.values, np.ones(data.n), source)
        g = data if data.centered else GramMatrix(_double_center_array(data.values), centered=True)
        return ViewOperator(g.values, np.ones(data.n), source)
    x = as_dataset(data)
    g = gram(x, source)
    c = weighted_center(g, WeightVector.ones(x.shape[0]))
    return ViewOperator(
        c.values,
        np.ones(x.shape[0]),
        source,
        train=x,
        col_means=g.values.mean(axis=0),
        grand_mean=float(g.values.mean()),
    )


def _view_size(data) -> int:
    if isinstance(data, GramMatrix):
        return data.n
    return as_dataset(data).shape[0]


@dataclass(frozen=True)
class TwoManifoldFit:
    """A fitted Instrumental Eigenmaps model.

    ``decomposition`` holds the selected components only (the trivial one
    already removed when ``drop_first``).
    """

    decomposition: PairedDecomposition
    view_x: ViewOperator
    view_y: ViewOperator
    config: TwoManifoldConfig
    full_spectrum: np.ndarray

    def coords(self, scaling: str | None = None) -> tuple[np.ndarray, np.ndarray]:
        scaling = scaling or self.config.scaling
        if scaling not in SCALINGS:
            raise ParameterError(f"unknown scaling {scaling!r}; expected one of {SCALINGS}")
        power = 0.5 if scaling == "paper" else 1.0
        root = np.sqrt(self.decomposition.spectrum)
        ex = (self.view_x.weights**power)[:, None] * self.decomposition.left_vectors * root
        ey = (self.view_y.weights**power)[:, None] * self.decomposition.right_vectors * root
        return ex, ey

    def result(self, scaling: str | None = None, provenance: dict | None = None) -> EmbeddingResult:
        ex, ey = self.coords(scaling)
        cfg = self.config.to_dict()
        if scaling is not None:
            cfg["scaling"] = scaling
        return EmbeddingResult(ex, ey, self.decomposition.spectrum.copy(), cfg, dict(provenance or {}))

    def _extend(self, view: ViewOperator, coeffs: np.ndarray, vectors: np.ndarray, x_new) -> np.ndarray:
        if view.train is None:
            raise InvalidInputError("out-of-sample embedding needs an explicit (linear or rbf) kernel view")
        if self.config.whitening != "none":
            raise InvalidInputError("out-of-sample embedding is only available without whitening")
        rows = cross_gram(x_new, view.train, view.source)
        centered = rows - rows.mean(axis=1, keepdims=True) - view.col_means[None, :] + view.grand_mean
        # training values of the singular functions are C c; rescale to the unit vectors
        train_vals = view.operator @ coeffs
        scale = np.einsum("ij,ij->j", vectors, train_vals)
        scale = np.where(np.abs(scale) > 0, scale, 1.0)
        return (centered @ coeffs) / scale * np.sqrt(self.decomposition.spectrum)

    def transform_x(self, x_new) -> np.ndarray:
        """Embed new ``x`` points (kernel views only; graph views have no extension)."""
        d = self.decomposition
        return self._extend(self.view_x, d.left_coeffs, d.left_vectors, x_new)

    def transform_y(self, y_new) -> np.ndarray:
        d = self.decomposition
        return self._extend(self.view_y, d.right_coeffs, d.right_vectors, y_new)


def fit_two_manifold(x, y, cfg: TwoManifoldConfig) -> TwoManifoldFit:
    """Build both view operators and decompose their product."""
    n = _view_size(x)
    if _view_size(y) != n:
        raise InvalidInputError(f"paired views need the same n, got {n} and {_view_size(y)}")
    drop = cfg.resolved_drop_first
    m = int(cfg.k) + (1 if drop else 0)
    if m > n:
        raise ParameterError(f"k{' + 1' if drop else ''} = {m} exceeds n = {n}")
    vx = build_view(x, cfg.view_x, cfg.graph_shift)
    vy = build_view(y, cfg.view_y, cfg.graph_shift)
    a, b = vx.operator, vy.operator
    if cfg.whitening == "cca":
        a = whiten_gram(a, cfg.eta)
    if cfg.whitening in ("rrr", "cca"):
        b = whiten_gram(b, cfg.eta)
    kind = {"none": "gram_svd", "rrr": "gram_rrr", "cca": "gram_cca"}[cfg.whitening]
    eta = 0.0 if cfg.whitening == "none" else cfg.eta
    dec = paired_svd(a, b, m, cfg.route, eta=eta, kind=kind)
    sel = dec.select(np.arange(1 if drop else 0, m))
    return TwoManifoldFit(sel, vx, vy, cfg, dec.spectrum.copy())


def instrumental_eigenmaps(x, y, cfg: TwoManifoldConfig | None = None) -> EmbeddingResult:
    """Denoised embeddings ``E_X``, ``E_Y`` of two paired views.

    Parameters
    ----------
    x, y : array_like or GramMatrix
        Paired observations (row ``i`` of ``x`` pairs with row ``i`` of
        ``y``); a precomputed view takes a :class:`GramMatrix`.
    cfg : TwoManifoldConfig, optional
        Defaults to kNN-graph views with ``k_nn=5`` and ``k=2``.

    Returns
    -------
    EmbeddingResult
        ``coords_x``, ``coords_y`` of shape ``(n, k)`` and the selected
        singular values.
    """
    cfg = cfg or TwoManifoldConfig()
    fit = fit_two_manifold(x, y, cfg)
    hashes = {}
    for name, data in (("x", x), ("y", y)):
        hashes[f"dataset_hash_{name}"] = dataset_hash(data.values if isinstance(data, GramMatrix) else data)
    return fit.result(provenance=hashes)
