"""Losses, Adam, the mini-batch training loop and evaluation metrics."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .data import WindowedDataset
from .models import LOSS_MODES

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 64
    max_steps: int = 2000
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    loss_mode: str = "time_domain"
    clip_norm: float | None = 10.0
    threads: int = 1

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_steps < 0:
            raise ValueError("max_steps must be >= 0")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")
        if not self.adam_eps > 0:
            raise ValueError("adam_eps must be positive")
        if self.loss_mode not in LOSS_MODES:
            raise ValueError(f"unknown loss mode {self.loss_mode!r}")
        if self.clip_norm is not None and not self.clip_norm > 0:
            raise ValueError("clip_norm must be positive or None")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass
class OptimizerState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0

    @classmethod
    def for_params(cls, params) -> OptimizerState:
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


@dataclass
class EvalReport:
    mse: float
    mae: float
    lag_steps: int
    n_samples: int
    mse_denorm: float | None = None
    mae_denorm: float | None = None

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2) + "\n")


def time_domain_loss(predictions, targets) -> float:
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(targets, dtype=float)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise ValueError("cannot average over zero samples")
    return float(np.mean((t - p) ** 2))


def coeff_domain_loss(predicted_coeffs, true_coeffs) -> float:
    """Batch mean of squared Euclidean distances between coefficient vectors."""
    p = np.atleast_2d(np.asarray(predicted_coeffs, dtype=float))
    t = np.atleast_2d(np.asarray(true_coeffs, dtype=float))
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {t.shape}")
    if p.shape[0] == 0:
        raise ValueError("cannot average over zero samples")
    return float(np.sum((t - p) ** 2) / p.shape[0])


def clip_global_norm(grads: list[np.ndarray], max_norm: float | None) -> float:
    """Scale ``grads`` in place so their joint L2 norm is at most ``max_norm``."""
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if max_norm is not None and norm > max_norm:
        for g in grads:
            g *= max_norm / norm
    return norm


def adam_step(params, grads, state: OptimizerState, config: TrainConfig):
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and optimizer state differ in length")
    state.step += 1
    b1, b2 = config.adam_beta1, config.adam_beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ValueError(f"shape mismatch: param {p.shape}, grad {g.shape}, state {m.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= config.learning_rate * (m / c1) / (np.sqrt(v / c2) + config.adam_eps)
    return params, state


@dataclass
class _Prepared:
    X: np.ndarray
    last: np.ndarray
    y: np.ndarray
    c_true: np.ndarray | None


def _prepare(model, ds: WindowedDataset) -> _Prepared:
    X = model.features(ds.windows)
    c_true = None
    if getattr(model, "loss_mode", "time_domain") == "coefficient_domain":
        c_true = model.coefficient_targets(ds.windows, ds.targets[:, 0])
    return _Prepared(X, ds.windows[:, -1].copy(), ds.targets[:, 0].copy(), c_true)


def _take(prep: _Prepared, idx) -> _Prepared:
    return _Prepared(prep.X[idx], prep.last[idx], prep.y[idx], None if prep.c_true is None else prep.c_true[idx])


def _loss_grads(model, batch: _Prepared):
    return model.loss_and_grads(batch.X, batch.last, batch.y, batch.c_true)


def _batch_loss_grads(model, batch: _Prepared, pool: ThreadPoolExecutor | None, threads: int):
    if pool is None or threads == 1 or batch.X.shape[0] < 2 * threads:
        return _loss_grads(model, batch)
    n = batch.X.shape[0]
    chunks = [c for c in np.array_split(np.arange(n), threads) if c.size]
    parts = list(pool.map(lambda c: _loss_grads(model, _take(batch, c)), chunks))
    # fixed-order reduction keeps results independent of scheduling
    loss = 0.0
    grads = [np.zeros_like(g) for g in parts[0][1]]
    for c, (l_c, g_c) in zip(chunks, parts):
        w = c.size / n
        loss += w * l_c
        for acc, g in zip(grads, g_c):
            acc += w * g
    return loss, grads


def dataset_loss(model, ds: WindowedDataset) -> float:
    """Training objective over the whole dataset (no parameter update)."""
    return _loss_grads(model, _prepare(model, ds))[0]


def train(model, dataset: WindowedDataset, config: TrainConfig):
    """Mini-batch Adam with replacement sampling; returns ``(model, loss_history)``."""
    if len(dataset) == 0:
        raise ValueError("training dataset is empty")
    if config.loss_mode != getattr(model, "loss_mode", "time_domain"):
        raise ValueError(f"config loss mode {config.loss_mode!r} does not match model loss mode {model.loss_mode!r}")
    window_size = getattr(model, "window_size", dataset.window_size)
    if window_size != dataset.window_size:
        raise ValueError(f"model window size {window_size} != dataset window size {dataset.window_size}")

    history: list[float] = []
    if config.max_steps == 0:
        return model, history
    prep = _prepare(model, dataset)
    rng = np.random.default_rng(config.seed)
    params = model.parameters()
    state = OptimizerState.for_params(params)
    pool = ThreadPoolExecutor(config.threads) if config.threads > 1 else None
    try:
        for step in range(config.max_steps):
            idx = rng.integers(0, len(dataset), size=config.batch_size)
            loss, grads = _batch_loss_grads(model, _take(prep, idx), pool, config.threads)
            if not math.isfinite(loss):
                raise FloatingPointError(f"loss diverged at step {step}: {loss}")
            history.append(loss)
            clip_global_norm(grads, config.clip_norm)
            adam_step(params, grads, state, config)
            if step % 500 == 0:
                log.debug("step %d loss %.6g", step, loss)
    finally:
        if pool is not None:
            pool.shutdown()
    return model, history


def lag_metric(predictions, truths, max_shift: int = 5) -> int:
    """Shift ``tau`` in ``[0, max_shift]`` best aligning ``predictions[tau:]`` with ``truths[:-tau]``.

    Alignment is Pearson correlation; ties go to the smaller shift and shifts
    with undefined correlation (constant segments) are skipped.
    """
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(truths, dtype=float)
    if p.shape != t.shape or p.ndim != 1:
        raise ValueError("predictions and truths must be 1-d and equally long")
    if max_shift < 0 or p.size <= 2 * max_shift:
        raise ValueError(f"series of length {p.size} too short for max_shift={max_shift}")
    best, best_corr = 0, -np.inf
    for tau in range(max_shift + 1):
        a, b = p[tau:], t[: t.size - tau]
        if a.std() == 0 or b.std() == 0:
            continue
        corr = float(np.corrcoef(a, b)[0, 1])
        if corr > best_corr + 1e-12:
            best, best_corr = tau, corr
    return best


def predict_dataset(model, ds: WindowedDataset) -> np.ndarray:
    """Normalized forecasts of shape ``(S, h)`` for every sample."""
    X = model.features(ds.windows)
    if ds.horizon == 1:
        return model.predict_features(X, ds.windows[:, -1])[:, None]
    return model.rollout(X, ds.windows[:, -1], ds.horizon)


def persistence_predictions(ds: WindowedDataset) -> np.ndarray:
    return np.repeat(ds.windows[:, -1:], ds.horizon, axis=1)


def report(predictions: np.ndarray, ds: WindowedDataset, max_shift: int = 5) -> EvalReport:
    """Metrics for ``(S, h)`` normalized predictions against ``ds``.

    Lag is measured on the denormalized first-step series, since consecutive
    normalized targets are each scaled by a different window mean.
    """
    pred = np.asarray(predictions, dtype=float).reshape(ds.targets.shape)
    err = pred - ds.targets
    raw_pred = (1.0 + pred) * ds.mu[:, None]
    raw_err = raw_pred - ds.raw_targets()
    shift = min(max_shift, (len(ds) - 1) // 2)
    return EvalReport(
        mse=float(np.mean(err**2)),
        mae=float(np.mean(np.abs(err))),
        lag_steps=lag_metric(raw_pred[:, 0], ds.raw_targets()[:, 0], shift),
        n_samples=len(ds),
        mse_denorm=float(np.mean(raw_err**2)),
        mae_denorm=float(np.mean(np.abs(raw_err))),
    )


def evaluate(model, dataset: WindowedDataset, max_shift: int = 5) -> EvalReport:
    if len(dataset) == 0:
        raise ValueError("evaluation dataset is empty")
    return report(predict_dataset(model, dataset), dataset, max_shift)


def write_loss_history(history, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "loss"])
        for i, loss in enumerate(history):
            w.writerow([i, repr(float(loss))])
