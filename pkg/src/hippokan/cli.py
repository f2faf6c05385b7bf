"""Command-line entry point: ``hippokan {train,eval,bench-params,reconstruct,lag-compare}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ConfigError, ExperimentConfig, build_dataset, load_series
from .data import chronological_split
from .hippo import legs_operator, reconstruct_window
from .models import MODEL_KINDS
from .training import evaluate, predict_dataset, report, train, write_loss_history

log = logging.getLogger("hippokan")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


class CommandError(RuntimeError):
    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"{stage} failed: {exc}")
        self.stage = stage
        self.config_error = isinstance(exc, ConfigError)


@contextmanager
def stage(name: str):
    try:
        yield
    except CommandError:
        raise
    except Exception as exc:
        raise CommandError(name, exc) from exc


def _config(args) -> ExperimentConfig:
    with stage("config"):
        base = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
        return base.with_overrides(seed=args.seed, out=args.out, threads=args.threads)


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _write_predictions(path: Path, ds, pred: np.ndarray) -> None:
    raw_pred = (1.0 + pred[:, 0]) * ds.mu
    raw_truth = ds.raw_targets()[:, 0]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "truth", "prediction", "truth_denorm", "prediction_denorm"])
        first = ds.start + ds.window_size
        for i in range(len(ds)):
            w.writerow([first + i, repr(float(ds.targets[i, 0])), repr(float(pred[i, 0])), repr(float(raw_truth[i])), repr(float(raw_pred[i]))])


def cmd_train(args) -> int:
    cfg = _config(args)
    out = cfg.out_dir
    with stage("data"):
        train_ds, _, test_ds = chronological_split(build_dataset(cfg.data), cfg.data.split)
    with stage("model"):
        model = cfgmod.build_model(cfg)
    with stage("train"):
        model, history = train(model, train_ds, cfg.train)
    with stage("eval"):
        rep = evaluate(model, test_ds, cfg.lag.max_shift)
    with stage("write"):
        out.mkdir(parents=True, exist_ok=True)
        meta = {"window_size": cfg.data.window, "horizon": cfg.data.horizon, "normalization": "window_mean_relative", "experiment": cfg.to_dict()}
        save_checkpoint(out / "checkpoint.npz", model, meta)
        write_loss_history(history, out / "loss_history.csv")
        rep.to_json(out / "eval_report.json")
        (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
    log.info("trained %d steps; test mse %.4g mae %.4g lag %d", len(history), rep.mse, rep.mae, rep.lag_steps)
    print(json.dumps({"mse": rep.mse, "mae": rep.mae, "lag_steps": rep.lag_steps, "out": str(out)}))
    return EXIT_OK


def cmd_eval(args) -> int:
    with stage("checkpoint"):
        model, meta = load_checkpoint(args.checkpoint)
    with stage("config"):
        if args.config:
            cfg = ExperimentConfig.load(args.config)
        else:
            cfg = ExperimentConfig.from_dict(meta.get("experiment", {}))
        cfg = cfg.with_overrides(seed=args.seed, out=args.out, threads=args.threads)
        if "window_size" in meta and cfg.data.window != meta["window_size"]:
            raise ConfigError(f"data window {cfg.data.window} is incompatible with checkpoint window {meta['window_size']}")
    with stage("data"):
        ds = build_dataset(cfg.data)
        if args.split != "all":
            ds = dict(zip(("train", "val", "test"), chronological_split(ds, cfg.data.split)))[args.split]
    with stage("eval"):
        pred = predict_dataset(model, ds)
        rep = report(pred, ds, cfg.lag.max_shift)
    with stage("write"):
        out = cfg.out_dir
        out.mkdir(parents=True, exist_ok=True)
        rep.to_json(out / "eval_report.json")
        _write_predictions(out / "predictions.csv", ds, pred)
    print(json.dumps({"mse": rep.mse, "mae": rep.mae, "lag_steps": rep.lag_steps, "n_samples": rep.n_samples}))
    return EXIT_OK


def bench_rows(cfg: ExperimentConfig, windows, kinds) -> list[dict]:
    """Parameter counts per (model, window) plus the scaling check each kind must satisfy."""
    rows = []
    for kind in kinds:
        if kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {kind!r} in bench list")
        sub = ExperimentConfig.from_dict(cfg.to_dict() | {"model": cfg.to_dict()["model"] | {"kind": kind}})
        if kind == "kan":
            sub.model.widths = None
        counts = [cfgmod.build_model(sub, window=L).param_count() for L in windows]
        if kind == "kan":
            check = "linear_in_window"
            ok = all(c * windows[0] == counts[0] * L for c, L in zip(counts, windows))
        else:
            check = "constant"
            ok = len(set(counts)) <= 1
        rows += [{"model": kind, "window": L, "params": c, "check": check, "pass": ok} for L, c in zip(windows, counts)]
    return rows


def cmd_bench_params(args) -> int:
    cfg = _config(args)
    with stage("config"):
        windows = _int_list(args.windows) if args.windows is not None else list(cfg.bench.windows)
        kinds = [k for k in args.models.split(",") if k] if args.models is not None else list(cfg.bench.models)
        if any(L < 1 for L in windows):
            raise ConfigError("bench windows must be positive")
        rows = bench_rows(cfg, windows, kinds) if windows else []
    with stage("write"):
        out = cfg.out_dir
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "param_bench.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, ["model", "window", "params", "check", "pass"])
            w.writeheader()
            w.writerows(rows)
    for r in rows:
        print(f"{r['model']:>10} L={r['window']:<6} params={r['params']:<8} {r['check']}: {'pass' if r['pass'] else 'FAIL'}")
    return EXIT_OK if all(r["pass"] for r in rows) else EXIT_RUNTIME


def reconstruction_table(window: np.ndarray, n_list, discretization: str = "bilinear"):
    """Per-N reconstructions of ``window`` and their L2 errors."""
    recons = {n: reconstruct_window(window, legs_operator(n, discretization)) for n in n_list}
    errors = {n: float(np.linalg.norm(r - window)) for n, r in recons.items()}
    return recons, errors


def cmd_reconstruct(args) -> int:
    cfg = _config(args)
    with stage("config"):
        n_list = _int_list(args.n_list) if args.n_list else list(cfg.reconstruct.n_list)
        too_big = [n for n in n_list if n > cfg.reconstruct.max_n or n < 1]
        if too_big:
            raise ConfigError(f"state dimensions {too_big} outside [1, max_n={cfg.reconstruct.max_n}]")
    with stage("data"):
        values = load_series(cfg.data).values
        lo = cfg.reconstruct.start
        window = values[lo : lo + cfg.data.window]
        if window.size < cfg.data.window:
            raise ConfigError(f"series too short for a window of {cfg.data.window} starting at {lo}")
    with stage("reconstruct"):
        recons, errors = reconstruction_table(window, n_list, cfg.model.discretization)
    with stage("write"):
        out = cfg.out_dir
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "reconstruction.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "original"] + [f"reconstruction_N{n}" for n in n_list])
            for i in range(window.size):
                w.writerow([i + 1, repr(float(window[i]))] + [repr(float(recons[n][i])) for n in n_list])
        norm = float(np.linalg.norm(window))
        with open(out / "reconstruction_errors.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["N", "l2_error", "relative_l2_error"])
            for n in n_list:
                w.writerow([n, repr(errors[n]), repr(errors[n] / norm if norm else 0.0)])
    for n in n_list:
        print(f"N={n:<4} l2 error {errors[n]:.6g}")
    return EXIT_OK


def cmd_lag_compare(args) -> int:
    cfg = _config(args)
    with stage("config"):
        if cfg.model.kind == "kan":
            raise ConfigError("lag-compare needs a HiPPO model; the direct KAN has no coefficient space")
    with stage("data"):
        train_ds, _, test_ds = chronological_split(build_dataset(cfg.data), cfg.data.split)
    result = {}
    out = cfg.out_dir
    for mode, key in (("time_domain", "time_domain"), ("coefficient_domain", "coeff_domain")):
        with stage(f"train ({mode})"):
            tc = ExperimentConfig.from_dict(cfg.to_dict() | {"train": cfg.to_dict()["train"] | {"loss_mode": mode}})
            model, _ = train(cfgmod.build_model(tc), train_ds, tc.train)
        with stage(f"eval ({mode})"):
            pred = predict_dataset(model, test_ds)
            rep = report(pred, test_ds, cfg.lag.max_shift)
            result[f"lag_{key}"] = rep.lag_steps
            result[f"mse_{key}"] = rep.mse
            result[f"mae_{key}"] = rep.mae
        with stage("write"):
            out.mkdir(parents=True, exist_ok=True)
            _write_predictions(out / f"predictions_{key}.csv", test_ds, pred)
    with stage("write"):
        (out / "lag_compare.json").write_text(json.dumps(result, indent=2) + "\n")
    print(json.dumps(result))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML experiment file")
    common.add_argument("--seed", type=int, help="overrides train.seed")
    common.add_argument("--out", help=f"output directory (overrides config and ${cfgmod.OUT_ENV_VAR})")
    common.add_argument("--threads", type=int, help="worker threads for batch gradients")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="hippokan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="train a model and evaluate on the test split").set_defaults(func=cmd_train)
    p = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=("all", "train", "val", "test"), default="all")
    p.set_defaults(func=cmd_eval)
    p = sub.add_parser("bench-params", parents=[common], help="parameter counts versus window size")
    p.add_argument("--windows", help="comma-separated window sizes")
    p.add_argument("--models", help=f"comma-separated model kinds from {MODEL_KINDS}")
    p.set_defaults(func=cmd_bench_params)
    p = sub.add_parser("reconstruct", parents=[common], help="encode/decode fidelity versus state size")
    p.add_argument("--n-list", help="comma-separated state dimensions")
    p.set_defaults(func=cmd_reconstruct)
    sub.add_parser("lag-compare", parents=[common], help="time- vs coefficient-domain loss lag").set_defaults(func=cmd_lag_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"hippokan {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG if exc.config_error else EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
