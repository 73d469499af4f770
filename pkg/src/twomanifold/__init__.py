"""Spectral two-manifold learning: Instrumental Eigenmaps and friends."""
from .eigenmaps import GraphSource, TwoManifoldConfig, fit_two_manifold, instrumental_eigenmaps
from .embedding import EmbeddingResult
from .exceptions import (
    ConfigError,
    DegenerateDataError,
    InvalidInputError,
    NumericalConsistencyError,
    ParameterError,
    SingularMatrixError,
    TwoManifoldError,
)
from .graph import knn_adjacency, le_embed, le_gram
from .kernels import GramMatrix, KernelSpec, WeightVector, gram, median_bandwidth, weighted_center
from .linalg import double_center, sym_eig, sym_inv_sqrt, trunc_svd
from .spectral_iv import gram_cca, gram_rrr, gram_svd, linear_cca, linear_rrr, two_subspace_pca

__version__ = "0.1.0"
