"""Scaled-Legendre (LegS) projection operator.

A window ``u_1..u_L`` is absorbed one sample at a time by a discretized
version of

    dc/dt = (-A c + B u) / t

whose state ``c`` tracks the projection of the history onto the orthonormal
basis ``p_n(t, s) = sqrt(2n+1) P_n(2s/t - 1)`` under the uniform measure
``1/t`` on ``[0, t]``.  Indexing is 0-based throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal

import numpy as np
from scipy.linalg import solve_triangular

Discretization = Literal["bilinear", "forward_euler"]
DISCRETIZATIONS = ("bilinear", "forward_euler")


def _legs_matrices(state_dim: int) -> tuple[np.ndarray, np.ndarray]:
    q = np.sqrt(2.0 * np.arange(state_dim) + 1.0)
    a = np.tril(np.outer(q, q), k=-1) + np.diag(np.arange(1, state_dim + 1, dtype=float))
    return a, q.copy()


@dataclass(frozen=True)
class LegSOperator:
    state_dim: int
    discretization: Discretization = "bilinear"
    a_matrix: np.ndarray = field(init=False, repr=False, compare=False)
    b_vector: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.state_dim) != self.state_dim or self.state_dim < 1:
            raise ValueError(f"state_dim must be a positive integer, got {self.state_dim!r}")
        if self.discretization not in DISCRETIZATIONS:
            raise ValueError(f"unknown discretization {self.discretization!r}")
        a, b = _legs_matrices(int(self.state_dim))
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a_matrix", a)
        object.__setattr__(self, "b_vector", b)


@dataclass(frozen=True)
class CoeffVector:
    """HiPPO state after absorbing ``length_index`` samples."""

    values: np.ndarray
    length_index: int = 0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("coefficient values must be a non-empty 1-d vector")
        if not np.all(np.isfinite(values)):
            raise ValueError("coefficient values must be finite")
        if self.length_index < 0:
            raise ValueError("length_index must be non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def state_dim(self) -> int:
        return self.values.size

    @classmethod
    def zeros(cls, state_dim: int) -> CoeffVector:
        return cls(np.zeros(state_dim), 0)


def legs_operator(state_dim: int, discretization: Discretization = "bilinear") -> LegSOperator:
    return LegSOperator(state_dim, discretization)


@lru_cache(maxsize=65536)
def _step_terms(state_dim: int, discretization: str, t: int):
    """Factor pieces of the step absorbing sample number ``t`` (1-based).

    bilinear:       (I + A/2t) c_t = (I - A/2t) c_{t-1} + B u_t / t
    forward_euler:  c_t = (I - A/t) c_{t-1} + B u_t / t

    Returns ``(lhs, rhs, b_over_t)``; ``lhs`` is lower-triangular or None.
    """
    a, b = _legs_matrices(state_dim)
    eye = np.eye(state_dim)
    if discretization == "bilinear":
        lhs, rhs = eye + a / (2.0 * t), eye - a / (2.0 * t)
    else:
        lhs, rhs = None, eye - a / t
    for arr in (lhs, rhs):
        if arr is not None:
            arr.setflags(write=False)
    b_over_t = b / t
    b_over_t.setflags(write=False)
    return lhs, rhs, b_over_t


def _advance(state: np.ndarray, sample, op: LegSOperator, t: int) -> np.ndarray:
    # ``state`` is (N,) or (N, S); ``sample`` scalar or (S,)
    lhs, rhs, b_over_t = _step_terms(op.state_dim, op.discretization, t)
    rhs_val = rhs @ state + np.multiply.outer(b_over_t, sample)
    if lhs is None:
        return rhs_val
    return solve_triangular(lhs, rhs_val, lower=True, check_finite=False)


def encode_step(c: CoeffVector, sample: float, op: LegSOperator) -> CoeffVector:
    if c.state_dim != op.state_dim:
        raise ValueError(f"state has dim {c.state_dim}, operator expects {op.state_dim}")
    if not np.isfinite(sample):
        raise ValueError(f"sample must be finite, got {sample!r}")
    t = c.length_index + 1
    return CoeffVector(_advance(c.values, float(sample), op, t), t)


def _check_series(series) -> np.ndarray:
    u = np.asarray(series, dtype=float)
    if u.ndim != 1:
        raise ValueError("series must be one-dimensional")
    if u.size == 0:
        raise ValueError("cannot encode an empty series")
    if not np.all(np.isfinite(u)):
        raise ValueError("series contains non-finite samples")
    return u


def encode(series, op: LegSOperator) -> CoeffVector:
    """Fold ``encode_step`` over ``series`` starting from the zero state."""
    u = _check_series(series)
    c = CoeffVector.zeros(op.state_dim)
    for sample in u:
        c = encode_step(c, sample, op)
    return c


def encode_batch(windows, op: LegSOperator) -> np.ndarray:
    """Encode each row of an ``(S, L)`` array; returns ``(S, N)``.

    Same recurrence as :func:`encode`, run across all rows at once.
    """
    w = np.asarray(windows, dtype=float)
    if w.ndim != 2 or w.shape[1] == 0:
        raise ValueError("windows must be a 2-d array with at least one column")
    if not np.all(np.isfinite(w)):
        raise ValueError("windows contain non-finite samples")
    state = np.zeros((op.state_dim, w.shape[0]))
    for k in range(w.shape[1]):
        state = _advance(state, w[:, k], op, k + 1)
    return state.T.copy()


@lru_cache(maxsize=64)
def _encoding_matrix(state_dim: int, discretization: str, length: int) -> np.ndarray:
    op = LegSOperator(state_dim, discretization)
    m = encode_batch(np.eye(length), op).T
    m.setflags(write=False)
    return m


def encoding_matrix(length: int, op: LegSOperator) -> np.ndarray:
    """``(N, L)`` matrix ``E`` with ``encode(u).values == E @ u`` (encode is linear)."""
    if length < 1:
        raise ValueError("length must be >= 1")
    return _encoding_matrix(op.state_dim, op.discretization, int(length))


def legendre(n: int, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    p_prev, p = np.ones_like(x), x
    if n == 0:
        return p_prev
    for k in range(2, n + 1):
        p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
    return p


def _check_points(t: float, s) -> np.ndarray:
    if not t > 0:
        raise ValueError(f"t must be positive, got {t!r}")
    s = np.asarray(s, dtype=float)
    if np.any(s < 0) or np.any(s > t):
        raise ValueError(f"evaluation points must lie in [0, {t}]")
    return s


def basis_matrix(state_dim: int, t: float, s) -> np.ndarray:
    """Rows ``p_0..p_{N-1}`` evaluated at the points ``s``; shape ``(N, len(s))``."""
    s = _check_points(t, s)
    x = 2.0 * s / t - 1.0
    out = np.empty((state_dim,) + x.shape)
    out[0] = 1.0
    if state_dim > 1:
        out[1] = x
    for k in range(2, state_dim):
        out[k] = ((2 * k - 1) * x * out[k - 1] - (k - 1) * out[k - 2]) / k
    return out * np.sqrt(2.0 * np.arange(state_dim) + 1.0).reshape((-1,) + (1,) * x.ndim)


def basis_value(n: int, t: float, s: float) -> float:
    if n < 0:
        raise ValueError("basis index must be non-negative")
    s = _check_points(t, s)
    return float(np.sqrt(2 * n + 1) * legendre(n, 2.0 * s / t - 1.0))


def decode(c: CoeffVector, t: float, s_points) -> np.ndarray:
    """Reconstruct ``sum_n c_n p_n(t, s)`` at each point of ``s_points``."""
    return c.values @ basis_matrix(c.state_dim, t, np.atleast_1d(s_points))


def tail_weights(state_dim: int) -> np.ndarray:
    # p_n(t, t) = sqrt(2n+1) for every t > 0
    return np.sqrt(2.0 * np.arange(state_dim) + 1.0)


def decode_tail(c: CoeffVector, t: float | None = None) -> float:
    """Reconstruction at the right boundary ``s = t``; independent of ``t``."""
    if t is not None and not t > 0:
        raise ValueError("t must be positive")
    return float(tail_weights(c.state_dim) @ c.values)


def reconstruct_window(window, op: LegSOperator) -> np.ndarray:
    """Encode ``window`` and decode it back on the integer grid ``s = 1..L``."""
    u = _check_series(window)
    c = encode(u, op)
    return decode(c, float(u.size), np.arange(1, u.size + 1, dtype=float))
