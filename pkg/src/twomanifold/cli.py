"""Command-line interface: ``twomanifold <subcommand> [options]``.

Subcommands
-----------
gen     write a synthetic dataset (swiss_roll | linear | loop)
embed   one-manifold embedding of a CSV dataset (LE or kernel PCA)
twoman  Instrumental Eigenmaps on two paired CSV datasets
dyn     state-space discovery and multi-step prediction on a time series
sweep   run a seeded experiment battery from a JSON config
report  aggregate existing ``metrics.csv`` tables
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .dynamics import discover_state_space, fit_state_model, horizon_rmse, predict, rbf_source, sample_windows, windows_at
from .eigenmaps import GraphSource, TwoManifoldConfig, fit_two_manifold
from .embedding import dataset_hash
from .exceptions import ConfigError, TwoManifoldError
from .experiments import DYNAMICS_DEFAULTS, LINEAR_DEFAULTS, ExperimentConfig, read_metrics_csv, run_experiment, summarize
from .graph import le_embed
from .kernels import KernelSpec, kernel_pca, median_bandwidth
from .synthetic import (
    CHANNELS,
    LoopTrajectorySpec,
    SwissRollSpec,
    gen_linear,
    gen_loop_trajectory,
    gen_swiss_roll_pair,
    random_linear_model,
    read_dataset_csv,
    write_dataset_csv,
)


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------


def cmd_gen(args) -> int:
    cfg = _load_config(args.config)
    kind = args.kind or cfg.pop("kind", "swiss_roll")
    cfg.pop("kind", None)
    out = _out_dir(args)
    seed = args.seed if args.seed is not None else int(cfg.pop("seed", 0))
    cfg.pop("seed", None)
    if kind == "swiss_roll":
        if args.n is not None:
            cfg["n"] = args.n
        spec = SwissRollSpec(seed=seed, **{k: tuple(v) if isinstance(v, list) else v for k, v in cfg.items()})
        if args.noise is not None:
            spec = spec.with_noise(args.noise)
        x, y, z = gen_swiss_roll_pair(spec)
        write_dataset_csv(out / "x.csv", x, ["x1", "x2", "x3"])
        write_dataset_csv(out / "y.csv", y, ["y1", "y2", "y3"])
        write_dataset_csv(out / "z.csv", z, ["z1", "z2"])
        _write_json(out / "spec.json", {"kind": kind, **spec.to_dict()})
    elif kind == "linear":
        p = {**LINEAR_DEFAULTS, **cfg}
        if args.n is not None:
            p["n"] = args.n
        if args.noise is not None:
            p["noise"] = args.noise
        model = random_linear_model(int(p["d_x"]), int(p["d_y"]), int(p["k"]), float(p["noise"]), seed, float(p["signal"]))
        x, y, z = gen_linear(model, int(p["n"]))
        write_dataset_csv(out / "x.csv", x, [f"x{i + 1}" for i in range(x.shape[1])])
        write_dataset_csv(out / "y.csv", y, [f"y{i + 1}" for i in range(y.shape[1])])
        write_dataset_csv(out / "z.csv", z, [f"z{i + 1}" for i in range(z.shape[1])])
        np.savetxt(out / "m_map.csv", model.m_map, delimiter=",", fmt="%.17g")
        _write_json(out / "spec.json", {"kind": kind, "seed": seed, **p})
    elif kind == "loop":
        if args.n is not None:
            cfg["T"] = args.n
        if args.noise is not None:
            cfg["noise"] = args.noise
        spec = LoopTrajectorySpec(seed=seed, **cfg)
        traj = gen_loop_trajectory(spec)
        write_dataset_csv(out / "observations.csv", traj.observations, CHANNELS)
        write_dataset_csv(out / "positions.csv", traj.positions, ["px", "py"])
        _write_json(out / "spec.json", {"kind": kind, **spec.to_dict()})
    else:
        raise ConfigError(f"unknown generator {kind!r}")
    return 0


def cmd_embed(args) -> int:
    cfg = _load_config(args.config)
    x, _ = read_dataset_csv(args.input)
    method = args.method or cfg.get("method", "le")
    k = args.k or int(cfg.get("k", 2))
    if method == "le":
        res = le_embed(
            x,
            k_nn=args.knn or int(cfg.get("k_nn", 5)),
            k=k,
            mode=cfg.get("weight_mode", "binary"),
            scaling=args.scaling or cfg.get("scaling", "paper"),
        )
    elif method == "kpca":
        gamma = cfg.get("gamma")
        spec = KernelSpec.rbf(gamma if gamma is not None else median_bandwidth(x)) if cfg.get("kernel", "rbf") == "rbf" else KernelSpec.linear()
        res = kernel_pca(x, spec, k)
    else:
        raise ConfigError(f"unknown embedding method {method!r}; expected le or kpca")
    res.save(_out_dir(args))
    return 0


def _two_manifold_config(args, cfg: dict) -> TwoManifoldConfig:
    tm = TwoManifoldConfig.from_dict(cfg) if cfg else TwoManifoldConfig()
    updates = {}
    if args.k is not None:
        updates["k"] = args.k
    if args.route is not None:
        updates["route"] = args.route
    if args.scaling is not None:
        updates["scaling"] = args.scaling
    if args.eta is not None:
        updates["eta"] = args.eta
    if args.knn is not None:
        for name in ("view_x", "view_y"):
            src = getattr(tm, name)
            if isinstance(src, GraphSource):
                updates[name] = GraphSource(args.knn, src.weight_mode, src.gamma)
    if updates:
        tm = TwoManifoldConfig.from_dict({**tm.to_dict(), **{k: (v.to_dict() if hasattr(v, "to_dict") else v) for k, v in updates.items()}})
    return tm


def cmd_twoman(args) -> int:
    x, _ = read_dataset_csv(args.x)
    y, _ = read_dataset_csv(args.y)
    tm = _two_manifold_config(args, _load_config(args.config))
    fit = fit_two_manifold(x, y, tm)
    res = fit.result(provenance={"dataset_hash_x": dataset_hash(x), "dataset_hash_y": dataset_hash(y)})
    out = _out_dir(args)
    res.save(out)
    fit.decomposition.save(out)
    return 0


def cmd_dyn(args) -> int:
    cfg = _load_config(args.config)
    d = {**DYNAMICS_DEFAULTS, **{k: v for k, v in cfg.items() if k in DYNAMICS_DEFAULTS}}
    if args.k is not None:
        d["k"] = args.k
    if args.knn is not None:
        d["k_nn"] = args.knn
    obs, _ = read_dataset_csv(args.input)
    targets, names = read_dataset_csv(args.targets)
    if targets.shape[0] != obs.shape[0]:
        raise ConfigError("targets must have one row per time step of the series")
    lf, lp, H, ntr = int(d["l_f"]), int(d["l_p"]), int(d["horizon"]), int(d["train"])
    if ntr + lp + H >= obs.shape[0]:
        raise ConfigError("series too short for the train split, window and horizon")
    w = sample_windows(obs[:ntr], lf, lp)
    last = min(obs.shape[0] - 1 - H, obs.shape[0] - lf)
    test_idx = np.arange(ntr + lp, last + 1)
    wt = windows_at(obs, test_idx, lf, lp)
    models = cfg.get("models", ["graph", "rbf", "linear"])
    curves = {}
    for name in models:
        if name == "graph":
            sf = sp = GraphSource(int(d["k_nn"]))
        elif name == "rbf":
            sf, sp = rbf_source(w.futures), rbf_source(w.pasts)
        elif name == "linear":
            sf = sp = KernelSpec.linear()
        else:
            raise ConfigError(f"unknown dynamics model {name!r}")
        fit = discover_state_space(w, sf, sp, int(d["k"]), route=args.route or "svd")
        model = fit_state_model(w, fit, targets[w.indices], float(d["ridge_lambda"]), filter_k=int(d["filter_k"]))
        curves[name] = horizon_rmse(predict(model, wt, H), targets, test_idx)
    out = _out_dir(args)
    header = ["horizon"] + [f"rmse_{m}" for m in models]
    table = np.column_stack([np.arange(1, H + 1)] + [curves[m] for m in models])
    np.savetxt(out / "prediction_rmse.csv", table, delimiter=",", header=",".join(header), comments="", fmt="%.17g")
    _write_json(out / "dyn.json", {"settings": d, "models": models, "mean_rmse": {m: float(curves[m].mean()) for m in models}})
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    if not cfg:
        raise ConfigError("sweep needs --config")
    if args.seed is not None:
        cfg["seeds"] = [args.seed]
    exp = ExperimentConfig.from_dict(cfg)
    overrides = {}
    if any(v is not None for v in (args.k, args.knn, args.route, args.scaling, args.eta)):
        overrides["two_manifold"] = _two_manifold_config(args, exp.two_manifold.to_dict())
    if args.eta is not None:
        overrides["eta"] = args.eta
    if overrides:
        exp = ExperimentConfig.from_dict({**exp.to_dict(), **{k: v.to_dict() if hasattr(v, "to_dict") else v for k, v in overrides.items()}})
    report = run_experiment(exp, out_dir=args.out_dir)
    for w in report.summary["win_rates"]:
        print(f"{w['method']} vs {w['baseline']} [{w['metric']}]: win rate {w['win_rate']:.2f} ({w['wins']}/{w['seeds']})")
    return 0


def cmd_report(args) -> int:
    rows = []
    for path in args.inputs:
        p = Path(path)
        rows.extend(read_metrics_csv(p / "metrics.csv" if p.is_dir() else p))
    methods = sorted({r[1] for r in rows})
    comps = []
    if args.baseline:
        comps = [(m, args.baseline) for m in methods if m != args.baseline]
    summary = summarize(rows, comps)
    out = _out_dir(args)
    _write_json(out / "report.json", summary)
    for m, mets in summary["methods"].items():
        for met, s in mets.items():
            if not met.startswith("rmse_h"):
                print(f"{m:24s} {met:12s} mean {s['mean']:.4f}  std {s['std']:.4f}  n={s['n']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twomanifold", description="Spectral two-manifold learning.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out-dir", required=out_required, default=None)
        p.add_argument("--k", type=int, help="embedding / state dimension")
        p.add_argument("--knn", type=int, help="neighbors per point for graph views")
        p.add_argument("--eta", type=float, help="whitening regularizer")
        p.add_argument("--route", choices=("svd", "eig"))
        p.add_argument("--scaling", choices=("paper", "classic"))

    p = sub.add_parser("gen", help="write a synthetic dataset")
    common(p)
    p.add_argument("--kind", choices=("swiss_roll", "linear", "loop"))
    p.add_argument("--n", type=int, help="sample count (series length for loop)")
    p.add_argument("--noise", type=float, help="noise standard deviation")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("embed", help="one-manifold embedding")
    common(p)
    p.add_argument("--input", required=True, help="dataset CSV with header")
    p.add_argument("--method", choices=("le", "kpca"))
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("twoman", help="Instrumental Eigenmaps on paired datasets")
    common(p)
    p.add_argument("--x", required=True, help="first view CSV")
    p.add_argument("--y", required=True, help="second view CSV (same row count)")
    p.set_defaults(func=cmd_twoman)

    p = sub.add_parser("dyn", help="state-space discovery and prediction")
    common(p)
    p.add_argument("--input", required=True, help="observation series CSV, one row per step")
    p.add_argument("--targets", required=True, help="target series CSV (e.g. positions)")
    p.set_defaults(func=cmd_dyn)

    p = sub.add_parser("sweep", help="seeded experiment battery")
    common(p, out_required=False)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="aggregate metrics.csv files")
    p.add_argument("inputs", nargs="+", help="metrics.csv files or directories holding one")
    p.add_argument("--baseline", help="method to compute win rates against")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TwoManifoldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
