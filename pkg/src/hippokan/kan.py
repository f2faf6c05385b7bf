"""Kolmogorov-Arnold network with B-spline edges and analytic gradients.

Every edge carries ``phi(x) = w_b * silu(x) + w_s * spline(x)`` with
``spline(x) = sum_i theta_i B_i(clamp(x))``; node ``j`` of layer ``l+1`` is the
sum of the edges feeding into it.  Everything is batched over a leading axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SplineGrid:
    lo: float = -2.0
    hi: float = 2.0
    intervals: int = 9
    order: int = 3
    knots: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"degenerate grid range [{self.lo}, {self.hi}]")
        if self.intervals < 1:
            raise ValueError("grid needs at least one interval")
        if self.order < 0:
            raise ValueError("spline order must be non-negative")
        h = (self.hi - self.lo) / self.intervals
        knots = self.lo + h * np.arange(-self.order, self.intervals + self.order + 1)
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)

    @property
    def n_basis(self) -> int:
        return self.intervals + self.order

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / self.intervals


def _cox_de_boor(x: np.ndarray, grid: SplineGrid, degree: int) -> np.ndarray:
    """Degree-``degree`` basis on the full knot vector; ``x`` already in [lo, hi]."""
    t, k = grid.knots, grid.order
    span = np.floor((x - grid.lo) / grid.spacing).astype(int)
    span = np.clip(span, 0, grid.intervals - 1) + k
    basis = (np.arange(len(t) - 1) == span[..., None]).astype(float)
    for d in range(1, degree + 1):
        left = (x[..., None] - t[: -d - 1]) / (t[d:-1] - t[: -d - 1])
        right = (t[d + 1 :] - x[..., None]) / (t[d + 1 :] - t[1:-d])
        basis = left * basis[..., :-1] + right * basis[..., 1:]
    return basis


def bspline_basis(x, grid: SplineGrid) -> np.ndarray:
    """All ``G + k`` basis values at ``x`` (clamped into the grid range)."""
    x = np.clip(np.asarray(x, dtype=float), grid.lo, grid.hi)
    return _cox_de_boor(x, grid, grid.order)


def bspline_basis_derivative(x, grid: SplineGrid) -> np.ndarray:
    """d/dx of :func:`bspline_basis`; zero where ``x`` was clamped."""
    x = np.asarray(x, dtype=float)
    k = grid.order
    if k == 0:
        return np.zeros(x.shape + (grid.n_basis,))
    xc = np.clip(x, grid.lo, grid.hi)
    lower = _cox_de_boor(xc, grid, k - 1)
    # uniform knots: B'_{i,k} = k / (k h) * (B_{i,k-1} - B_{i+1,k-1})
    deriv = (lower[..., :-1] - lower[..., 1:]) / grid.spacing
    inside = (x >= grid.lo) & (x <= grid.hi)
    return deriv * inside[..., None]


def sigmoid(x):
    x = np.asarray(x, dtype=float)
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def silu(x):
    x = np.asarray(x, dtype=float)
    return x * sigmoid(x)


def silu_grad(x):
    s = sigmoid(x)
    return s * (1.0 + np.asarray(x, dtype=float) * (1.0 - s))


@dataclass
class KanEdge:
    spline_coeffs: np.ndarray
    w_b: float = 1.0
    w_s: float = 1.0

    def __post_init__(self):
        self.spline_coeffs = np.asarray(self.spline_coeffs, dtype=float)
        if not (np.all(np.isfinite(self.spline_coeffs)) and np.isfinite(self.w_b) and np.isfinite(self.w_s)):
            raise ValueError("edge parameters must be finite")


def edge_forward(x, edge: KanEdge, grid: SplineGrid):
    if edge.spline_coeffs.shape != (grid.n_basis,):
        raise ValueError(f"edge has {edge.spline_coeffs.size} coefficients, grid needs {grid.n_basis}")
    spline = bspline_basis(x, grid) @ edge.spline_coeffs
    return edge.w_b * silu(x) + edge.w_s * spline


class KanLayer:
    """``n_out x n_in`` edges sharing one grid; parameters stored as arrays."""

    def __init__(self, n_in: int, n_out: int, grid: SplineGrid, rng=None, init_scale: float = 0.1):
        if n_in < 1 or n_out < 1:
            raise ValueError("layer widths must be >= 1")
        rng = np.random.default_rng() if rng is None else rng
        self.grid = grid
        self.coeffs = init_scale * rng.standard_normal((n_out, n_in, grid.n_basis))
        self.w_b = np.ones((n_out, n_in))
        self.w_s = np.ones((n_out, n_in))

    @property
    def n_in(self) -> int:
        return self.coeffs.shape[1]

    @property
    def n_out(self) -> int:
        return self.coeffs.shape[0]

    def parameters(self) -> list[np.ndarray]:
        return [self.coeffs, self.w_b, self.w_s]

    def edge(self, j: int, i: int) -> KanEdge:
        return KanEdge(self.coeffs[j, i].copy(), float(self.w_b[j, i]), float(self.w_s[j, i]))

    def set_edge(self, j: int, i: int, edge: KanEdge) -> None:
        self.coeffs[j, i] = edge.spline_coeffs
        self.w_b[j, i] = edge.w_b
        self.w_s[j, i] = edge.w_s

    def forward(self, x: np.ndarray):
        basis = bspline_basis(x, self.grid)  # (B, in, nb)
        spline = np.einsum("bik,oik->boi", basis, self.coeffs)
        act = silu(x)
        out = act @ self.w_b.T + np.einsum("boi,oi->bo", spline, self.w_s)
        return out, (x, basis, spline, act)

    def backward(self, cache, upstream: np.ndarray):
        x, basis, spline, act = cache
        d_w_b = upstream.T @ act
        d_w_s = np.einsum("bo,boi->oi", upstream, spline)
        d_coeffs = np.einsum("bo,bik->oik", upstream, basis) * self.w_s[..., None]
        dspline = np.einsum("bik,oik->boi", bspline_basis_derivative(x, self.grid), self.coeffs)
        d_x = silu_grad(x) * (upstream @ self.w_b) + np.einsum("bo,oi,boi->bi", upstream, self.w_s, dspline)
        return LayerGrad(d_coeffs, d_w_b, d_w_s), d_x


@dataclass
class LayerGrad:
    coeffs: np.ndarray
    w_b: np.ndarray
    w_s: np.ndarray


@dataclass
class GradientBundle:
    layers: list[LayerGrad]
    inputs: np.ndarray

    def flat(self) -> list[np.ndarray]:
        """Parameter gradients in :meth:`KanNetwork.parameters` order."""
        return [g for lg in self.layers for g in (lg.coeffs, lg.w_b, lg.w_s)]


@dataclass
class KanTrace:
    network_id: int
    fingerprint: int
    caches: list
    batched: bool


class KanNetwork:
    def __init__(
        self,
        widths,
        intervals: int = 9,
        order: int = 3,
        grid_range: tuple[float, float] = (-2.0, 2.0),
        seed: int | None = 0,
        init_scale: float = 0.1,
    ):
        widths = [int(w) for w in widths]
        if not widths or min(widths) < 1:
            raise ValueError(f"widths must be a non-empty list of positive integers, got {widths}")
        self.widths = widths
        self.grid = SplineGrid(float(grid_range[0]), float(grid_range[1]), intervals, order)
        rng = np.random.default_rng(seed)
        self.layers = [KanLayer(a, b, self.grid, rng, init_scale) for a, b in zip(widths, widths[1:])]

    def parameters(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.parameters()]

    def _fingerprint(self) -> int:
        return hash(b"".join(p.tobytes() for p in self.parameters()))

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, KanTrace]:
        """Batched forward: ``x`` is ``(B, n_0)`` or ``(n_0,)``."""
        x = np.asarray(x, dtype=float)
        batched = x.ndim == 2
        h = x if batched else x[None, :]
        if h.ndim != 2 or h.shape[1] != self.widths[0]:
            raise ValueError(f"expected input width {self.widths[0]}, got shape {x.shape}")
        caches = []
        for layer in self.layers:
            h, cache = layer.forward(h)
            caches.append(cache)
        trace = KanTrace(id(self), self._fingerprint(), caches, batched)
        return (h if batched else h[0]), trace

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, trace: KanTrace, upstream) -> GradientBundle:
        if trace.network_id != id(self) or trace.fingerprint != self._fingerprint():
            raise ValueError("trace does not belong to this network state; rerun forward")
        g = np.asarray(upstream, dtype=float)
        if not trace.batched:
            g = g[None, :]
        n_batch = trace.caches[0][0].shape[0] if trace.caches else g.shape[0]
        if g.shape != (n_batch, self.widths[-1]):
            raise ValueError(f"upstream shape {np.shape(upstream)} does not match network output")
        grads = []
        for layer, cache in zip(reversed(self.layers), reversed(trace.caches)):
            lg, g = layer.backward(cache, g)
            grads.append(lg)
        grads.reverse()
        return GradientBundle(grads, g if trace.batched else g[0])

    def param_count(self) -> int:
        return param_count(self)


def network_forward(x, net: KanNetwork):
    return net.forward(x)


def network_backward(trace: KanTrace, upstream, net: KanNetwork) -> GradientBundle:
    return net.backward(trace, upstream)


def param_count(net: KanNetwork) -> int:
    per_edge = net.grid.n_basis + 2
    return sum(a * b * per_edge for a, b in zip(net.widths, net.widths[1:]))
