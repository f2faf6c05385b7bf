"""Forecasters built on the HiPPO encoder, plus the direct-KAN baseline.

All models take per-window normalized inputs and emit normalized predictions.
Each exposes the same training surface:

* ``features(windows)`` precomputes whatever the model consumes per window
  (HiPPO coefficients, or the raw window for the direct KAN);
* ``loss_and_grads(X, last, y, c_true)`` returns the batch loss and gradients
  aligned with ``parameters()``.
"""

from __future__ import annotations

import numpy as np

from .hippo import CoeffVector, encode, encoding_matrix, legs_operator, tail_weights
from .kan import KanNetwork, param_count

LOSS_MODES = ("time_domain", "coefficient_domain")
MODEL_KINDS = ("hippo_kan", "hippo_mlp", "kan")
DEFAULT_MLP_HIDDEN = (32, 64, 64, 32, 32)


def _check_window(window) -> np.ndarray:
    w = np.asarray(window, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("window must be a non-empty 1-d vector")
    return w


def _check_horizon(h: int) -> int:
    if int(h) != h or h < 1:
        raise ValueError(f"horizon must be a positive integer, got {h!r}")
    return int(h)


class DenseNetwork:
    """Fully connected net with tanh hidden units and a linear output layer."""

    def __init__(self, widths, seed: int | None = 0):
        widths = [int(w) for w in widths]
        if len(widths) < 2 or min(widths) < 1:
            raise ValueError(f"dense widths must list >= 2 positive sizes, got {widths}")
        self.widths = widths
        rng = np.random.default_rng(seed)
        self.weights = [rng.standard_normal((a, b)) / np.sqrt(a) for a, b in zip(widths, widths[1:])]
        self.biases = [np.zeros(b) for b in widths[1:]]

    def parameters(self) -> list[np.ndarray]:
        return [p for wb in zip(self.weights, self.biases) for p in wb]

    def param_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def forward(self, x: np.ndarray):
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.tanh(h)
            acts.append(h)
        return h, acts

    def backward(self, acts, upstream: np.ndarray):
        grads = []
        g = upstream
        for i in reversed(range(len(self.weights))):
            if i < len(self.weights) - 1:
                g = g * (1.0 - acts[i + 1] ** 2)
            grads.append((acts[i].T @ g, g.sum(axis=0)))
            g = g @ self.weights[i].T
        grads.reverse()
        return [p for wb in grads for p in wb], g


class _CoefficientForecaster:
    """Shared HiPPO encode / decode plumbing around a learnable coefficient map."""

    kind = ""

    def __init__(self, state_dim: int, discretization: str = "bilinear", loss_mode: str = "time_domain"):
        if loss_mode not in LOSS_MODES:
            raise ValueError(f"unknown loss mode {loss_mode!r}")
        self.hippo = legs_operator(state_dim, discretization)
        self.loss_mode = loss_mode
        self.boundary_weights = np.zeros(state_dim)
        self._tail = tail_weights(state_dim)

    @property
    def state_dim(self) -> int:
        return self.hippo.state_dim

    @property
    def uses_boundary(self) -> bool:
        return self.loss_mode == "time_domain"

    # subclasses provide the coefficient map
    def _map(self, C: np.ndarray):
        raise NotImplementedError

    def _map_backward(self, trace, upstream: np.ndarray) -> list[np.ndarray]:
        raise NotImplementedError

    def map_parameters(self) -> list[np.ndarray]:
        raise NotImplementedError

    def _map_param_count(self) -> int:
        raise NotImplementedError

    def parameters(self) -> list[np.ndarray]:
        params = self.map_parameters()
        return params + [self.boundary_weights] if self.uses_boundary else params

    def param_count(self) -> int:
        return self._map_param_count() + (self.state_dim if self.uses_boundary else 0)

    def features(self, windows) -> np.ndarray:
        w = np.atleast_2d(np.asarray(windows, dtype=float))
        return w @ encoding_matrix(w.shape[1], self.hippo).T

    def coefficient_targets(self, windows, next_values) -> np.ndarray:
        """Encoded length-(L+1) ground-truth windows."""
        w = np.column_stack([np.atleast_2d(windows), np.asarray(next_values, dtype=float)])
        return w @ encoding_matrix(w.shape[1], self.hippo).T

    def coeff_map(self, c: CoeffVector) -> CoeffVector:
        if c.state_dim != self.state_dim:
            raise ValueError(f"coefficient vector has dim {c.state_dim}, model expects {self.state_dim}")
        out, _ = self._map(c.values[None, :])
        return CoeffVector(out[0], c.length_index + 1)

    def _tail_value(self, C_hat: np.ndarray, last: np.ndarray) -> np.ndarray:
        if self.uses_boundary:
            return C_hat @ self._tail + (self._tail @ self.boundary_weights) * last
        return C_hat @ self._tail

    def predict_features(self, X: np.ndarray, last: np.ndarray) -> np.ndarray:
        return self._tail_value(self._map(X)[0], np.asarray(last, dtype=float))

    def rollout(self, X: np.ndarray, last: np.ndarray, horizon: int) -> np.ndarray:
        horizon = _check_horizon(horizon)
        C, u_last = X, np.asarray(last, dtype=float)
        preds = np.empty((X.shape[0], horizon))
        for j in range(horizon):
            C = self._map(C)[0]
            u_last = preds[:, j] = self._tail_value(C, u_last)
        return preds

    def forecast_next(self, window) -> float:
        w = _check_window(window)
        c_hat = self.coeff_map(encode(w, self.hippo))
        return float(self._tail_value(c_hat.values[None, :], w[-1:])[0])

    def forecast_horizon(self, window, h: int) -> np.ndarray:
        w = _check_window(window)
        h = _check_horizon(h)
        c, u_last = encode(w, self.hippo), w[-1]
        out = np.empty(h)
        for j in range(h):
            c = self.coeff_map(c)
            u_last = out[j] = float(self._tail_value(c.values[None, :], np.array([u_last]))[0])
        return out

    def loss_and_grads(self, X, last, y=None, c_true=None):
        C_hat, trace = self._map(X)
        n = X.shape[0]
        if self.loss_mode == "coefficient_domain":
            if c_true is None:
                raise ValueError("coefficient-domain loss needs encoded targets")
            diff = C_hat - c_true
            loss = float(np.sum(diff**2) / n)
            return loss, self._map_backward(trace, 2.0 * diff / n)
        if y is None:
            raise ValueError("time-domain loss needs next-value targets")
        pred = self._tail_value(C_hat, last)
        resid = pred - y
        loss = float(np.mean(resid**2))
        d_pred = 2.0 * resid / n
        grads = self._map_backward(trace, np.outer(d_pred, self._tail))
        return loss, grads + [self._tail * (d_pred @ last)]

    def config(self) -> dict:
        return {
            "kind": self.kind,
            "state_dim": self.state_dim,
            "discretization": self.hippo.discretization,
            "loss_mode": self.loss_mode,
        }


class HippoKanModel(_CoefficientForecaster):
    """Encode the window, map coefficients with a KAN, read the next value off the tail."""

    kind = "hippo_kan"

    def __init__(
        self,
        state_dim: int = 16,
        widths=None,
        intervals: int = 9,
        order: int = 3,
        grid_range=(-2.0, 2.0),
        discretization: str = "bilinear",
        loss_mode: str = "time_domain",
        seed: int | None = 0,
        init_scale: float = 0.1,
    ):
        super().__init__(state_dim, discretization, loss_mode)
        widths = list(widths) if widths is not None else [state_dim, state_dim]
        if widths[0] != state_dim or widths[-1] != state_dim:
            raise ValueError(f"KAN widths {widths} must start and end at state_dim={state_dim}")
        self.kan = KanNetwork(widths, intervals, order, grid_range, seed, init_scale)

    def _map(self, C):
        return self.kan.forward(C)

    def _map_backward(self, trace, upstream):
        return self.kan.backward(trace, upstream).flat()

    def map_parameters(self):
        return self.kan.parameters()

    def _map_param_count(self):
        return param_count(self.kan)

    def config(self):
        g = self.kan.grid
        return super().config() | {
            "widths": list(self.kan.widths),
            "intervals": g.intervals,
            "order": g.order,
            "grid_range": [g.lo, g.hi],
        }


class HippoMlpModel(_CoefficientForecaster):
    kind = "hippo_mlp"

    def __init__(
        self,
        state_dim: int = 16,
        hidden=DEFAULT_MLP_HIDDEN,
        discretization: str = "bilinear",
        loss_mode: str = "time_domain",
        seed: int | None = 0,
    ):
        super().__init__(state_dim, discretization, loss_mode)
        self.mlp = DenseNetwork([state_dim, *hidden, state_dim], seed)

    def _map(self, C):
        return self.mlp.forward(C)

    def _map_backward(self, trace, upstream):
        return self.mlp.backward(trace, upstream)[0]

    def map_parameters(self):
        return self.mlp.parameters()

    def _map_param_count(self):
        return self.mlp.param_count()

    def config(self):
        return super().config() | {"hidden": self.mlp.widths[1:-1]}


class DirectKanModel:
    """KAN reading the raw normalized window: widths ``[L, ..., 1]``."""

    kind = "kan"
    loss_mode = "time_domain"

    def __init__(
        self,
        window_size: int = 120,
        widths=None,
        intervals: int = 9,
        order: int = 3,
        grid_range=(-2.0, 2.0),
        seed: int | None = 0,
        init_scale: float = 0.1,
        loss_mode: str = "time_domain",
    ):
        if loss_mode != "time_domain":
            raise ValueError("the direct KAN has no coefficient space; only time_domain loss applies")
        widths = list(widths) if widths is not None else [window_size, 1]
        if widths[0] != window_size or widths[-1] != 1:
            raise ValueError(f"direct KAN widths {widths} must run from window_size={window_size} to 1")
        self.kan = KanNetwork(widths, intervals, order, grid_range, seed, init_scale)

    @property
    def window_size(self) -> int:
        return self.kan.widths[0]

    def parameters(self):
        return self.kan.parameters()

    def param_count(self) -> int:
        return param_count(self.kan)

    def features(self, windows) -> np.ndarray:
        w = np.atleast_2d(np.asarray(windows, dtype=float))
        if w.shape[1] != self.window_size:
            raise ValueError(f"window length {w.shape[1]} != model window size {self.window_size}")
        return w

    def predict_features(self, X, last=None) -> np.ndarray:
        return self.kan.forward(X)[0][:, 0]

    def rollout(self, X, last, horizon: int) -> np.ndarray:
        horizon = _check_horizon(horizon)
        W = np.array(X, dtype=float)
        preds = np.empty((W.shape[0], horizon))
        for j in range(horizon):
            preds[:, j] = self.predict_features(W)
            W = np.column_stack([W[:, 1:], preds[:, j]])
        return preds

    def forecast_next(self, window) -> float:
        return float(self.predict_features(self.features(_check_window(window)))[0])

    def forecast_horizon(self, window, h: int) -> np.ndarray:
        X = self.features(_check_window(window))
        return self.rollout(X, X[:, -1], h)[0]

    def loss_and_grads(self, X, last=None, y=None, c_true=None):
        if y is None:
            raise ValueError("time-domain loss needs next-value targets")
        out, trace = self.kan.forward(X)
        resid = out[:, 0] - y
        loss = float(np.mean(resid**2))
        return loss, self.kan.backward(trace, (2.0 * resid / X.shape[0])[:, None]).flat()

    def config(self) -> dict:
        g = self.kan.grid
        return {
            "kind": self.kind,
            "window_size": self.window_size,
            "widths": list(self.kan.widths),
            "intervals": g.intervals,
            "order": g.order,
            "grid_range": [g.lo, g.hi],
            "loss_mode": self.loss_mode,
        }


def build_model(config: dict, seed: int | None = 0):
    """Instantiate a model from the dict produced by its ``config()``."""
    cfg = dict(config)
    kind = cfg.pop("kind")
    if kind == "hippo_kan":
        return HippoKanModel(seed=seed, **cfg)
    if kind == "hippo_mlp":
        return HippoMlpModel(seed=seed, **cfg)
    if kind == "kan":
        return DirectKanModel(seed=seed, **cfg)
    raise ValueError(f"unknown model kind {kind!r}; choose from {MODEL_KINDS}")


def coeff_map(c: CoeffVector, model: _CoefficientForecaster) -> CoeffVector:
    return model.coeff_map(c)


def forecast_next(window, model) -> float:
    return model.forecast_next(window)


def forecast_horizon(window, h: int, model) -> np.ndarray:
    return model.forecast_horizon(window, h)


def model_param_count(model) -> int:
    return model.param_count()
