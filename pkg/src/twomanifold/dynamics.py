"""State-space discovery for time series from past/future windows.

The future window starting at ``t`` and the past window ending at ``t - 1``
are two views of the (unobserved) state at ``t``: what the past predicts
about the future is exactly what the state carries, while observation
noise in the two windows is independent. A paired decomposition of the
two windows' Grams therefore yields a state space (the futures side), on
which linear readout and dynamics maps are fitted by ridge regression.

Filtering -- turning a fresh past window into a state -- is done by
regressing the training states on the training past windows: kernel
ridge regression for kernel sources, a k-nearest-neighbor average in the
past-window space for graph sources (graph embeddings have no closed-form
extension to unseen points).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .eigenmaps import GraphSource, TwoManifoldConfig, TwoManifoldFit, fit_two_manifold
from .exceptions import DegenerateDataError, InvalidInputError, ParameterError
from .graph import knn_indices
from .kernels import KernelSpec, as_dataset, cross_gram, gram, median_bandwidth

__all__ = [
    "WindowedSeries",
    "StateSpaceModel",
    "valid_indices",
    "sample_windows",
    "windows_at",
    "rbf_source",
    "discover_state_space",
    "fit_state_model",
    "filter_states",
    "predict_from_states",
    "predict",
    "horizon_rmse",
]

DEFAULT_RIDGE = 1e-4


@dataclass(frozen=True)
class WindowedSeries:
    """Row-aligned future/past windows of a series.

    ``futures[i]`` flattens ``series[t_i : t_i + l_f]`` and ``pasts[i]``
    flattens ``series[t_i - l_p : t_i]`` (time-major: all channels of the
    first step, then the next step, ...).
    """

    futures: np.ndarray
    pasts: np.ndarray
    indices: np.ndarray
    l_f: int
    l_p: int

    @property
    def n(self) -> int:
        return self.indices.shape[0]


def valid_indices(T: int, l_f: int, l_p: int) -> np.ndarray:
    """All ``t`` with a full past window before and a full future window from ``t``."""
    if l_f < 1 or l_p < 1:
        raise ParameterError("window lengths must be >= 1")
    if T < l_f + l_p:
        raise InvalidInputError(f"series of length {T} is shorter than l_f + l_p = {l_f + l_p}")
    return np.arange(l_p, T - l_f + 1)


def windows_at(series, indices, l_f: int, l_p: int) -> WindowedSeries:
    """Windows at explicit time indices."""
    s = as_dataset(series, "series")
    idx = np.asarray(indices, dtype=np.int64)
    valid = valid_indices(s.shape[0], l_f, l_p)
    if idx.size and (idx.min() < valid[0] or idx.max() > valid[-1]):
        raise InvalidInputError("window index out of range")
    fut = np.stack([s[t : t + l_f].ravel() for t in idx]) if idx.size else np.empty((0, l_f * s.shape[1]))
    past = np.stack([s[t - l_p : t].ravel() for t in idx]) if idx.size else np.empty((0, l_p * s.shape[1]))
    return WindowedSeries(fut, past, idx, int(l_f), int(l_p))


def sample_windows(series, l_f: int, l_p: int, n: int | None = None, seed: int = 0) -> WindowedSeries:
    """Sample ``n`` window pairs at distinct valid times (all of them if ``n`` is None).

    Sampled times are returned in increasing order so consecutive pairs
    can be used as state transitions.
    """
    s = as_dataset(series, "series")
    valid = valid_indices(s.shape[0], l_f, l_p)
    if n is None:
        idx = valid
    else:
        if not 1 <= n <= valid.shape[0]:
            raise ParameterError(f"n must lie in [1, {valid.shape[0]}], got {n}")
        idx = np.sort(np.random.default_rng(seed).choice(valid, size=n, replace=False))
    return windows_at(s, idx, l_f, l_p)


def rbf_source(data) -> KernelSpec:
    """RBF kernel with the median-trick bandwidth of ``data``."""
    return KernelSpec.rbf(median_bandwidth(data))


def discover_state_space(
    w: WindowedSeries,
    source_f,
    source_p,
    k: int,
    route: str = "svd",
    scaling: str = "paper",
) -> TwoManifoldFit:
    """Paired decomposition of the futures (left) and pasts (right) Grams.

    Sources are :class:`KernelSpec` or :class:`GraphSource`; graph sources
    drop the trivial leading direction. The returned fit exposes the
    :class:`~twomanifold.spectral_iv.PairedDecomposition` as
    ``.decomposition``; the state coordinates are its futures-side
    ``Lambda^{1/2}``-scaled coordinates (``fit.coords()[0]``).
    """
    cfg = TwoManifoldConfig(view_x=source_f, view_y=source_p, k=k, route=route, scaling=scaling)
    return fit_two_manifold(w.futures, w.pasts, cfg)


def _ridge(x: np.ndarray, y: np.ndarray, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Ridge regression with an unpenalized intercept: ``y ~ x @ coef + bias``."""
    mx, my = x.mean(axis=0), y.mean(axis=0)
    xc, yc = x - mx, y - my
    a = xc.T @ xc + lam * np.eye(x.shape[1])
    coef = np.linalg.solve(a, xc.T @ yc)
    return coef, my - mx @ coef


@dataclass(frozen=True)
class StateSpaceModel:
    """Linear readout and dynamics on a discovered state space.

    ``states`` are the training states, row-aligned with ``indices``. The
    filter maps a past window to a state: kernel ridge dual weights
    (``filter_alpha``) for kernel sources, or the ``filter_k`` nearest
    training past windows for graph sources.
    """

    states: np.ndarray
    indices: np.ndarray
    readout: np.ndarray
    readout_bias: np.ndarray
    dynamics: np.ndarray
    dynamics_bias: np.ndarray
    ridge_lambda: float
    source_p: object
    train_pasts: np.ndarray
    filter_alpha: np.ndarray | None
    filter_k: int
    state_mean: np.ndarray

    @property
    def k(self) -> int:
        return self.states.shape[1]


def fit_state_model(
    w: WindowedSeries,
    states,
    targets,
    ridge_lambda: float = DEFAULT_RIDGE,
    source_p=None,
    filter_k: int = 10,
) -> StateSpaceModel:
    """Fit readout (state -> target) and dynamics (state_t -> state_{t+1}).

    Parameters
    ----------
    w : WindowedSeries
        Training windows; ``targets`` rows align with ``w.indices``.
    states : TwoManifoldFit or (n, k) array
        A fit from :func:`discover_state_space` (its futures-side
        coordinates are used) or explicit state coordinates.
    ridge_lambda : float
        Ridge penalty of readout, dynamics and (kernel) filter.
    source_p : KernelSpec or GraphSource, optional
        Past-window source used to build the filter; taken from the fit
        when ``states`` is one. Without it the model cannot filter.
    """
    if isinstance(states, TwoManifoldFit):
        source_p = source_p or states.config.view_y
        states = states.coords()[0]
    s = np.asarray(states, dtype=float)
    y = as_dataset(targets, "targets")
    if s.shape[0] != w.n or y.shape[0] != w.n:
        raise InvalidInputError("states and targets must be row-aligned with the windows")
    if ridge_lambda < 0:
        raise ParameterError("ridge_lambda must be non-negative")
    k = s.shape[1]

    pos = {int(t): i for i, t in enumerate(w.indices)}
    pairs = [(i, pos[int(t) + 1]) for i, t in enumerate(w.indices) if int(t) + 1 in pos]
    if len(pairs) < k + 1:
        raise DegenerateDataError(f"only {len(pairs)} transition pairs for a {k}-dimensional state")
    src, dst = np.array(pairs).T

    readout, rbias = _ridge(s, y, ridge_lambda)
    dyn, dbias = _ridge(s[src], s[dst], ridge_lambda)

    alpha = None
    if isinstance(source_p, KernelSpec):
        if source_p.kind == "precomputed":
            raise InvalidInputError("cannot filter with a precomputed kernel")
        g = gram(w.pasts, source_p).values
        n = g.shape[0]
        mean = s.mean(axis=0)
        alpha = np.linalg.solve(g + ridge_lambda * n * np.eye(n), s - mean)
    return StateSpaceModel(
        states=s,
        indices=w.indices.copy(),
        readout=readout,
        readout_bias=rbias,
        dynamics=dyn,
        dynamics_bias=dbias,
        ridge_lambda=float(ridge_lambda),
        source_p=source_p,
        train_pasts=w.pasts,
        filter_alpha=alpha,
        filter_k=int(filter_k),
        state_mean=s.mean(axis=0),
    )


def filter_states(model: StateSpaceModel, pasts) -> np.ndarray:
    """Estimate states from (unseen) past windows."""
    p = as_dataset(pasts, "pasts")
    if model.source_p is None:
        raise InvalidInputError("model has no past-window source to filter with")
    if isinstance(model.source_p, GraphSource):
        d2 = cdist(p, model.train_pasts, "sqeuclidean")
        nb = knn_indices(d2, min(model.filter_k, model.train_pasts.shape[0]))
        return model.states[nb].mean(axis=1)
    rows = cross_gram(p, model.train_pasts, model.source_p)
    return model.state_mean + rows @ model.filter_alpha


def predict_from_states(model: StateSpaceModel, states, horizon: int) -> np.ndarray:
    """Iterate the dynamics ``horizon`` times; read out after every step.

    Returns an array of shape ``(n, horizon, d_target)`` whose slice ``h-1``
    predicts the target ``h`` steps ahead.
    """
    if horizon < 1:
        raise ParameterError(f"horizon must be >= 1, got {horizon}")
    s = np.atleast_2d(np.asarray(states, dtype=float))
    out = np.empty((s.shape[0], horizon, model.readout.shape[1]))
    for h in range(horizon):
        s = s @ model.dynamics + model.dynamics_bias
        out[:, h] = s @ model.readout + model.readout_bias
    return out


def predict(model: StateSpaceModel, w_test: WindowedSeries, horizon: int) -> np.ndarray:
    """Filter from each test past window, then predict ``1..horizon`` steps ahead."""
    return predict_from_states(model, filter_states(model, w_test.pasts), horizon)


def horizon_rmse(pred: np.ndarray, targets: np.ndarray, origins) -> np.ndarray:
    """RMSE per horizon of ``pred[i, h-1]`` against ``targets[origins[i] + h]``."""
    origins = np.asarray(origins, dtype=np.int64)
    horizon = pred.shape[1]
    truth = np.stack([targets[origins + h] for h in range(1, horizon + 1)], axis=1)
    return np.sqrt(np.mean(np.sum((pred - truth) ** 2, axis=2), axis=0))
