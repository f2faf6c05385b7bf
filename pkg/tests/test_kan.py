import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.interpolate import BSpline

from conftest import naive_kan_forward, network_fd_errors, relative_error, smooth_input
from hippokan.kan import (
    KanEdge,
    KanNetwork,
    SplineGrid,
    bspline_basis,
    bspline_basis_derivative,
    edge_forward,
    network_backward,
    network_forward,
    param_count,
    silu,
    silu_grad,
)


class TestBasis:
    @pytest.mark.parametrize("intervals, order", [(9, 3), (5, 3), (2, 1), (4, 0), (7, 2)])
    def test_partition_of_unity(self, rng, intervals, order):
        grid = SplineGrid(-2.0, 2.0, intervals, order)
        x = np.r_[rng.uniform(-2, 2, 1000), -2.0, 2.0, grid.knots[order : order + intervals + 1]]
        b = bspline_basis(x, grid)
        assert b.shape == (x.size, intervals + order)
        np.testing.assert_allclose(b.sum(axis=-1), 1.0, rtol=0, atol=1e-12)
        assert np.all(b >= -1e-15)

    def test_local_support(self, rng):
        grid = SplineGrid()
        x = rng.uniform(-2, 2, 200)
        assert np.all(np.count_nonzero(bspline_basis(x, grid) > 1e-14, axis=-1) <= grid.order + 1)

    def test_order_zero_indicator(self):
        grid = SplineGrid(0.0, 4.0, 4, 0)
        np.testing.assert_array_equal(bspline_basis(2.5, grid), [0, 0, 1, 0])
        np.testing.assert_array_equal(bspline_basis(4.0, grid), [0, 0, 0, 1])

    def test_hat_functions(self):
        b = bspline_basis(0.25, SplineGrid(0.0, 1.0, 2, 1))
        # knots -0.5, 0, 0.5, 1, 1.5: the hats peaking at 0 and 0.5 are both active
        np.testing.assert_allclose(b, [0.5, 0.5, 0.0], atol=1e-15)

    def test_clamped_outside_range(self):
        grid = SplineGrid()
        np.testing.assert_array_equal(bspline_basis(7.0, grid), bspline_basis(2.0, grid))
        np.testing.assert_array_equal(bspline_basis(-7.0, grid), bspline_basis(-2.0, grid))

    def test_matches_scipy_design_matrix(self, rng):
        grid = SplineGrid(-1.0, 3.0, 6, 3)
        x = rng.uniform(-1, 3, 100)
        ref = BSpline.design_matrix(x, grid.knots, 3).toarray()
        np.testing.assert_allclose(bspline_basis(x, grid), ref, atol=1e-13)

    def test_derivative_matches_scipy(self, rng):
        grid = SplineGrid()
        x = rng.uniform(-1.99, 1.99, 50)
        ref = np.stack([BSpline(grid.knots, np.eye(grid.n_basis)[i], 3).derivative()(x) for i in range(grid.n_basis)], -1)
        np.testing.assert_allclose(bspline_basis_derivative(x, grid), ref, atol=1e-12)

    def test_derivative_zero_when_clamped(self):
        assert not np.any(bspline_basis_derivative(np.array([-3.0, 5.0]), SplineGrid()))

    @pytest.mark.parametrize("lo, hi, g, k", [(1.0, 1.0, 3, 3), (0.0, 1.0, 0, 3), (0.0, 1.0, 3, -1)])
    def test_grid_rejects_bad_configs(self, lo, hi, g, k):
        with pytest.raises(ValueError):
            SplineGrid(lo, hi, g, k)


class TestSilu:
    def test_zero(self):
        assert silu(0.0) == 0.0

    @pytest.mark.parametrize("x", [20.0, 35.0, 100.0])
    def test_saturates(self, x):
        assert abs(silu(x) - x) < 1e-6

    def test_negative_minimum(self):
        x = np.linspace(0, 20, 200_001)
        values = silu(-x)
        assert np.all(values > -0.3) and np.all(values[1:] < 0)
        assert values.min() == pytest.approx(-0.278, abs=1e-3)

    def test_no_overflow(self):
        with np.errstate(all="raise"):
            assert silu(-1000.0) == pytest.approx(0.0, abs=1e-300)

    def test_gradient(self, rng):
        x = rng.normal(scale=3, size=100)
        fd = (silu(x + 1e-6) - silu(x - 1e-6)) / 2e-6
        np.testing.assert_allclose(silu_grad(x), fd, atol=1e-8)


class TestEdge:
    def test_all_off(self, rng):
        edge = KanEdge(rng.normal(size=12), 0.0, 0.0)
        assert edge_forward(1.3, edge, SplineGrid()) == 0.0

    def test_silu_only_at_zero(self, rng):
        assert edge_forward(0.0, KanEdge(rng.normal(size=12), 1.0, 0.0), SplineGrid()) == 0.0

    def test_constant_spline(self, rng):
        edge = KanEdge(np.full(12, 0.7), 0.0, 1.0)
        np.testing.assert_allclose(edge_forward(rng.uniform(-2, 2, 30), edge, SplineGrid()), 0.7, atol=1e-12)

    def test_rejects_wrong_size(self):
        with pytest.raises(ValueError):
            edge_forward(0.0, KanEdge(np.zeros(5)), SplineGrid())

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            KanEdge(np.zeros(12), w_b=float("inf"))


class TestNetwork:
    def test_single_edge_constant(self):
        net = KanNetwork([1, 1])
        net.layers[0].set_edge(0, 0, KanEdge(np.full(12, -1.25), 0.0, 1.0))
        for x in (-1.5, 0.0, 1.9):
            assert net(np.array([x]))[0] == pytest.approx(-1.25, abs=1e-12)

    def test_silu_sum_at_origin(self):
        net = KanNetwork([2, 1])
        for i in range(2):
            net.layers[0].set_edge(0, i, KanEdge(np.ones(12), 1.0, 0.0))
        assert net(np.zeros(2))[0] == 0.0

    @pytest.mark.parametrize("widths", [[3, 4, 2], [16, 2, 16], [5, 1]])
    def test_matches_naive_loops(self, rng, widths):
        net = KanNetwork(widths, intervals=5, seed=int(rng.integers(1 << 30)), init_scale=0.5)
        for _ in range(3):
            x = rng.uniform(-2.5, 2.5, widths[0])
            np.testing.assert_allclose(network_forward(x, net)[0], naive_kan_forward(net, x), rtol=1e-12, atol=1e-12)

    def test_batched_matches_rows(self, rng):
        net = KanNetwork([4, 3, 2], seed=3)
        X = rng.normal(size=(7, 4))
        np.testing.assert_allclose(net(X), np.stack([net(x) for x in X]), rtol=1e-13, atol=1e-14)

    def test_rejects_width_mismatch(self):
        with pytest.raises(ValueError):
            KanNetwork([3, 2])(np.zeros(4))

    @pytest.mark.parametrize("widths", [[], [3, 0], [0]])
    def test_rejects_bad_widths(self, widths):
        with pytest.raises(ValueError):
            KanNetwork(widths)

    def test_seed_determinism(self):
        a, b = KanNetwork([4, 4], seed=11), KanNetwork([4, 4], seed=11)
        assert all(np.array_equal(p, q) for p, q in zip(a.parameters(), b.parameters()))


class TestBackward:
    def test_zero_upstream(self, rng):
        net = KanNetwork([3, 4, 2], seed=1)
        _, trace = net.forward(rng.normal(size=3))
        grads = network_backward(trace, np.zeros(2), net)
        assert not any(np.any(g) for g in grads.flat())
        assert not np.any(grads.inputs)

    def test_single_edge_ws_gradient(self):
        net = KanNetwork([1, 1], seed=2)
        x = np.array([0.6])
        _, trace = net.forward(x)
        g = net.backward(trace, np.ones(1))
        edge = net.layers[0].edge(0, 0)
        spline = bspline_basis(0.6, net.grid) @ edge.spline_coeffs
        assert g.layers[0].w_s[0, 0] == pytest.approx(spline, rel=1e-14)

    def test_example_network_fd(self, rng):
        net = KanNetwork([3, 4, 2], intervals=5, order=3, seed=5, init_scale=0.3)
        errs = network_fd_errors(net, smooth_input(net, rng), rng.normal(size=2))
        assert errs.max() < 1e-4

    @pytest.mark.parametrize("widths", [[2, 3], [3, 4, 2], [16, 2, 16]])
    def test_input_gradient_fd(self, rng, widths):
        net = KanNetwork(widths, seed=7, init_scale=0.3)
        x, up = smooth_input(net, rng), rng.normal(size=widths[-1])
        _, trace = net.forward(x)
        analytic = net.backward(trace, up).inputs
        eye = np.eye(widths[0]) * 1e-5
        numeric = [(up @ net(x + e) - up @ net(x - e)) / 2e-5 for e in eye]
        assert relative_error(analytic, numeric).max() < 1e-4

    def test_batched_gradient_is_sum(self, rng):
        net = KanNetwork([3, 2], seed=4)
        X, U = rng.normal(size=(5, 3)), rng.normal(size=(5, 2))
        _, trace = net.forward(X)
        total = net.backward(trace, U).flat()
        parts = [net.backward(net.forward(x)[1], u).flat() for x, u in zip(X, U)]
        for i, g in enumerate(total):
            np.testing.assert_allclose(g, sum(p[i] for p in parts), rtol=1e-12, atol=1e-14)

    def test_stale_trace_rejected(self, rng):
        net = KanNetwork([2, 2], seed=0)
        _, trace = net.forward(rng.normal(size=2))
        net.layers[0].w_b[0, 0] += 0.1
        with pytest.raises(ValueError):
            net.backward(trace, np.ones(2))

    def test_foreign_trace_rejected(self, rng):
        a, b = KanNetwork([2, 2], seed=0), KanNetwork([2, 2], seed=0)
        _, trace = a.forward(rng.normal(size=2))
        with pytest.raises(ValueError):
            b.backward(trace, np.ones(2))

    def test_upstream_shape_checked(self, rng):
        net = KanNetwork([2, 2], seed=0)
        _, trace = net.forward(rng.normal(size=2))
        with pytest.raises(ValueError):
            net.backward(trace, np.ones(3))


class TestParamCount:
    @pytest.mark.parametrize(
        "widths, g, k, expected",
        [([120, 1], 9, 3, 1680), ([1200, 1], 9, 3, 16800), ([1, 1], 1, 0, 3), ([16, 16], 9, 3, 3584), ([16, 2, 16], 9, 3, 896)],
    )
    def test_values(self, widths, g, k, expected):
        assert param_count(KanNetwork(widths, g, k)) == expected

    def test_matches_array_sizes(self):
        net = KanNetwork([5, 3, 2], 4, 2)
        assert net.param_count() == sum(p.size for p in net.parameters())

    @settings(max_examples=25, deadline=None)
    @given(widths=st.lists(st.integers(1, 6), min_size=2, max_size=4), g=st.integers(1, 10), k=st.integers(0, 4))
    def test_formula(self, widths, g, k):
        net = KanNetwork(widths, g, k)
        assert param_count(net) == sum(a * b * (g + k + 2) for a, b in zip(widths, widths[1:]))
