"""Seeded experiment batteries with CSV/JSON reporting.

An experiment draws one dataset per seed from a generator, runs a list of
methods on it, scores each with the generator's metrics and writes

* ``metrics.csv`` -- long format ``seed, method, metric, value``;
* ``summary.json`` -- per-method means/stds and win rates;
* ``timing.json`` -- wall-clock stamps (kept apart so the first two files
  are byte-identical across repeated runs).
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import discover_state_space, fit_state_model, horizon_rmse, predict, rbf_source, sample_windows, windows_at
from .eigenmaps import GraphSource, TwoManifoldConfig, fit_two_manifold
from .exceptions import ConfigError, ExperimentError, TwoManifoldError
from .graph import knn_adjacency, le_eigenpairs, le_scale
from .kernels import KernelSpec, kernel_pca, median_bandwidth
from .linalg import sym_inv_sqrt, trunc_svd
from .metrics import principal_angles, scaled_procrustes_error
from .spectral_iv import linear_cca, linear_rrr, two_subspace_pca
from .synthetic import LoopTrajectorySpec, SwissRollSpec, gen_linear, gen_loop_trajectory, gen_swiss_roll_pair, random_linear_model

__all__ = [
    "GENERATORS",
    "METHODS",
    "ExperimentConfig",
    "MetricReport",
    "run_experiment",
    "summarize",
    "read_metrics_csv",
    "write_report",
]

METHODS = {
    "swiss_roll": ("two_manifold_paper", "two_manifold_classic", "le_paper", "le_classic", "kpca_rbf"),
    "linear": ("two_subspace_pca", "pca", "rrr", "cca"),
    "loop": ("graph", "rbf", "linear"),
}
GENERATORS = tuple(METHODS)
METRICS = {
    "swiss_roll": ("procrustes",),
    "linear": ("max_angle", "mean_angle"),
    "loop": ("rmse",),
}
DYNAMICS_DEFAULTS = {
    "l_f": 25,
    "l_p": 25,
    "k": 10,
    "k_nn": 50,
    "ridge_lambda": 1e-4,
    "horizon": 50,
    "train": 2000,
    "filter_k": 10,
}
LINEAR_DEFAULTS = {"d_x": 10, "d_y": 10, "k": 2, "n": 10000, "noise": 1.0, "signal": 1.0}


def _check_keys(d: dict, allowed, what: str):
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown {what} keys {sorted(unknown)}")


@dataclass(frozen=True)
class ExperimentConfig:
    """What to generate, which methods to run and how to compare them.

    ``generator`` is a dict with ``"kind"`` in :data:`GENERATORS` plus the
    generator's parameters (without the seed). ``comparisons`` lists
    ``(method, baseline)`` pairs for win rates; by default the first method
    is compared against every other one.
    """

    generator: dict
    seeds: tuple = (0,)
    methods: tuple | None = None
    metrics: tuple | None = None
    comparisons: tuple | None = None
    two_manifold: TwoManifoldConfig = field(default_factory=TwoManifoldConfig)
    eta: float = 1e-4
    dynamics: dict = field(default_factory=dict)
    out_dir: str | None = None
    name: str = "experiment"

    def __post_init__(self):
        gen = dict(self.generator)
        kind = gen.get("kind")
        if kind not in GENERATORS:
            raise ConfigError(f"unknown generator {kind!r}; expected one of {GENERATORS}")
        params = {k: v for k, v in gen.items() if k != "kind"}
        if kind == "swiss_roll":
            _check_keys(params, set(SwissRollSpec.__dataclass_fields__) - {"seed"} | {"noise"}, "swiss_roll")
        elif kind == "linear":
            _check_keys(params, LINEAR_DEFAULTS, "linear")
        else:
            _check_keys(params, set(LoopTrajectorySpec.__dataclass_fields__) - {"seed"}, "loop")
        seeds = tuple(int(s) for s in self.seeds)
        if not seeds:
            raise ConfigError("at least one seed is required")
        if len(set(seeds)) != len(seeds):
            raise ConfigError("seeds must be distinct")
        methods = tuple(self.methods) if self.methods else METHODS[kind]
        bad = [m for m in methods if m not in METHODS[kind]]
        if bad:
            raise ConfigError(f"unknown method(s) {bad} for generator {kind!r}; expected from {METHODS[kind]}")
        metrics = tuple(self.metrics) if self.metrics else METRICS[kind]
        bad = [m for m in metrics if m not in METRICS[kind]]
        if bad:
            raise ConfigError(f"unknown metric(s) {bad} for generator {kind!r}")
        if self.comparisons is None:
            comps = tuple((methods[0], m) for m in methods[1:])
        else:
            comps = tuple(tuple(c) for c in self.comparisons)
        for c in comps:
            if len(c) != 2 or any(m not in methods for m in c):
                raise ConfigError(f"comparison {c} must name two configured methods")
        _check_keys(self.dynamics, DYNAMICS_DEFAULTS, "dynamics")
        if not isinstance(self.two_manifold, TwoManifoldConfig):
            raise ConfigError("two_manifold must be a TwoManifoldConfig")
        if not self.eta > 0:
            raise ConfigError("eta must be positive")
        for name, value in (("generator", gen), ("seeds", seeds), ("methods", methods),
                            ("metrics", metrics), ("comparisons", comps)):
            object.__setattr__(self, name, value)
        object.__setattr__(self, "dynamics", {**DYNAMICS_DEFAULTS, **self.dynamics})

    @property
    def kind(self) -> str:
        return self.generator["kind"]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "generator": self.generator,
            "seeds": list(self.seeds),
            "methods": list(self.methods),
            "metrics": list(self.metrics),
            "comparisons": [list(c) for c in self.comparisons],
            "two_manifold": self.two_manifold.to_dict(),
            "eta": self.eta,
            "dynamics": self.dynamics,
            "out_dir": self.out_dir,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        _check_keys(d, cls.__dataclass_fields__, "experiment")
        if "generator" not in d:
            raise ConfigError("experiment config needs a 'generator'")
        if "two_manifold" in d:
            d["two_manifold"] = TwoManifoldConfig.from_dict(d["two_manifold"])
        if "comparisons" in d and d["comparisons"] is not None:
            d["comparisons"] = tuple(tuple(c) for c in d["comparisons"])
        for key in ("seeds", "methods", "metrics"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(d)


@dataclass(frozen=True)
class MetricReport:
    """Long-format rows ``(seed, method, metric, value)`` plus aggregates."""

    rows: tuple
    summary: dict
    runtime: dict

    def table(self, method: str, metric: str) -> np.ndarray:
        """Values of one method/metric in seed order."""
        return np.array([r[3] for r in self.rows if r[1] == method and r[2] == metric])


# ---------------------------------------------------------------------------
# per-generator method runners; each returns {method: {metric: value}}


def _swiss_seed(cfg: ExperimentConfig, seed: int) -> dict:
    params = {k: v for k, v in cfg.generator.items() if k != "kind"}
    noise = params.pop("noise", None)
    spec = SwissRollSpec(seed=seed, **{k: tuple(v) if isinstance(v, list) else v for k, v in params.items()})
    if noise is not None:
        spec = spec.with_noise(float(noise))
    x, y, z = gen_swiss_roll_pair(spec)
    tm = cfg.two_manifold
    out = {}
    fit = None
    le = None
    for method in cfg.methods:
        with _context(seed, method):
            if method.startswith("two_manifold"):
                fit = fit if fit is not None else fit_two_manifold(x, y, tm)
                coords = fit.coords(method.rsplit("_", 1)[1])[0]
            elif method.startswith("le"):
                if le is None:
                    src = tm.view_x if isinstance(tm.view_x, GraphSource) else GraphSource()
                    graph = knn_adjacency(x, int(src.k_nn), src.weight_mode, src.gamma)
                    le = (le_eigenpairs(graph, int(tm.k))[1], graph.degrees)
                coords = le_scale(le[0], le[1], method.rsplit("_", 1)[1])
            else:  # kpca_rbf
                coords = kernel_pca(x, KernelSpec.rbf(median_bandwidth(x, seed=seed)), int(tm.k)).coords_x
            out[method] = {"procrustes": scaled_procrustes_error(coords, z)}
    return out


def _linear_seed(cfg: ExperimentConfig, seed: int) -> dict:
    p = {**LINEAR_DEFAULTS, **{k: v for k, v in cfg.generator.items() if k != "kind"}}
    model = random_linear_model(int(p["d_x"]), int(p["d_y"]), int(p["k"]), float(p["noise"]), seed, float(p["signal"]))
    x, y, _ = gen_linear(model, int(p["n"]))
    k = int(p["k"])
    out = {}
    for method in cfg.methods:
        with _context(seed, method):
            if method == "pca":
                xc = x - x.mean(axis=0)
                basis = trunc_svd(xc.T @ xc / x.shape[0], k).left_vectors
            elif method == "two_subspace_pca":
                basis = two_subspace_pca(x, y, k).left_vectors
            elif method == "rrr":
                basis = linear_rrr(x, y, cfg.eta, k).left_vectors
            else:  # cca: canonical loadings (S_XX + eta)^{1/2} U live in range(M)
                xc = x - x.mean(axis=0)
                sxx = xc.T @ xc / x.shape[0]
                basis = np.linalg.solve(sym_inv_sqrt(sxx, cfg.eta), linear_cca(x, y, cfg.eta, k).left_vectors)
            ang = principal_angles(basis, model.m_map)
            out[method] = {"max_angle": float(ang.max()), "mean_angle": float(ang.mean())}
    return out


def _loop_seed(cfg: ExperimentConfig, seed: int) -> dict:
    params = {k: v for k, v in cfg.generator.items() if k != "kind"}
    traj = gen_loop_trajectory(LoopTrajectorySpec(seed=seed, **params))
    d = cfg.dynamics
    obs, pos = traj.observations, traj.positions
    lf, lp, H, ntr = int(d["l_f"]), int(d["l_p"]), int(d["horizon"]), int(d["train"])
    if ntr + lp + H > obs.shape[0]:
        raise ConfigError("series too short for the requested train split, window and horizon")
    w = sample_windows(obs[:ntr], lf, lp)
    last = min(obs.shape[0] - 1 - H, obs.shape[0] - lf)
    test_idx = np.arange(ntr + lp, last + 1)
    wt = windows_at(obs, test_idx, lf, lp)
    out = {}
    for method in cfg.methods:
        with _context(seed, method):
            if method == "graph":
                sf, sp = GraphSource(int(d["k_nn"])), GraphSource(int(d["k_nn"]))
            elif method == "rbf":
                sf, sp = rbf_source(w.futures), rbf_source(w.pasts)
            else:
                sf = sp = KernelSpec.linear()
            fit = discover_state_space(w, sf, sp, int(d["k"]), route=cfg.two_manifold.route)
            model = fit_state_model(w, fit, pos[w.indices], float(d["ridge_lambda"]), filter_k=int(d["filter_k"]))
            curve = horizon_rmse(predict(model, wt, H), pos, test_idx)
            metrics = {f"rmse_h{h}": float(v) for h, v in enumerate(curve, start=1)}
            metrics["rmse_mean"] = float(curve.mean())
            out[method] = metrics
    return out


_RUNNERS = {"swiss_roll": _swiss_seed, "linear": _linear_seed, "loop": _loop_seed}


class _context:
    """Re-raise failures with the seed and method that produced them."""

    def __init__(self, seed, method):
        self.seed, self.method = seed, method

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, (ExperimentError, ConfigError)):
            if isinstance(exc, (TwoManifoldError, ArithmeticError, ValueError, np.linalg.LinAlgError)):
                raise ExperimentError(f"seed {self.seed}, method {self.method}: {exc}") from exc
        return False


# ---------------------------------------------------------------------------
# aggregation and output


def summarize(rows, comparisons) -> dict:
    """Means, standard deviations and win rates from long-format rows.

    A method "wins" a seed against a baseline when its metric is strictly
    smaller (all metrics here are errors). For horizon curves
    (``rmse_h<h>`` rows) the summary also reports the fraction of seeds in
    which the method wins at a strict majority of horizons.
    """
    table: dict = {}
    for seed, method, metric, value in rows:
        table.setdefault(method, {}).setdefault(metric, {})[int(seed)] = float(value)
    stats = {
        m: {
            met: {"mean": float(np.mean(list(v.values()))), "std": float(np.std(list(v.values()))), "n": len(v)}
            for met, v in sorted(mets.items())
        }
        for m, mets in sorted(table.items())
    }
    all_metrics = sorted({met for mets in table.values() for met in mets})
    headline = [m for m in all_metrics if not m.startswith("rmse_h")]
    wins = []
    majority = []
    for method, base in comparisons:
        for met in headline:
            a, b = table.get(method, {}).get(met, {}), table.get(base, {}).get(met, {})
            seeds = sorted(set(a) & set(b))
            n_win = sum(a[s] < b[s] for s in seeds)
            wins.append({
                "method": method,
                "baseline": base,
                "metric": met,
                "wins": n_win,
                "seeds": len(seeds),
                "win_rate": n_win / len(seeds) if seeds else float("nan"),
            })
        horizons = sorted((m for m in all_metrics if m.startswith("rmse_h")), key=lambda m: int(m[6:]))
        if horizons:
            seeds = sorted(set(table[method][horizons[0]]) & set(table[base][horizons[0]]))
            per_seed = []
            for s in seeds:
                better = sum(table[method][h][s] < table[base][h][s] for h in horizons)
                per_seed.append(better)
            n_major = sum(2 * c > len(horizons) for c in per_seed)
            majority.append({
                "method": method,
                "baseline": base,
                "horizons": len(horizons),
                "horizons_won_per_seed": per_seed,
                "seeds_with_majority": n_major,
                "seeds": len(seeds),
                "rate": n_major / len(seeds) if seeds else float("nan"),
            })
    out = {"methods": stats, "win_rates": wins}
    if majority:
        out["horizon_majority"] = majority
    return out


def write_report(report: MetricReport, out_dir, config: dict | None = None) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "metrics.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "method", "metric", "value"])
        for seed, method, metric, value in report.rows:
            w.writerow([seed, method, metric, repr(float(value))])
    summary = dict(report.summary)
    if config is not None:
        summary = {"config": config, **summary}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    (out / "timing.json").write_text(json.dumps(report.runtime, indent=2, sort_keys=True) + "\n")


def read_metrics_csv(path) -> list[tuple]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["seed", "method", "metric", "value"]:
            raise ConfigError(f"{path} is not a long-format metrics table")
        return [(int(s), m, met, float(v)) for s, m, met, v in reader]


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> MetricReport:
    """Run every method on every seed; write outputs when an out_dir is set.

    Raises
    ------
    ExperimentError
        If any method fails; the message names the seed and method.
    """
    runner = _RUNNERS[cfg.kind]
    rows = []
    runtime = {"seconds_per_seed": {}}
    start = time.perf_counter()
    for seed in cfg.seeds:
        t0 = time.perf_counter()
        result = runner(cfg, seed)
        runtime["seconds_per_seed"][str(seed)] = time.perf_counter() - t0
        for method in cfg.methods:
            for metric, value in result[method].items():
                rows.append((seed, method, metric, float(value)))
    runtime["total_seconds"] = time.perf_counter() - start
    report = MetricReport(tuple(rows), summarize(rows, cfg.comparisons), runtime)
    target = out_dir or cfg.out_dir
    if target is not None:
        write_report(report, target, cfg.to_dict())
    return report
