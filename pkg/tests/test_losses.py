import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from liftembed import network as nw
from liftembed.exceptions import ConfigurationError, TrainingError
from liftembed.lifting import build_geometry
from liftembed.losses import (LossReport, LossWeights, assemble, boundary_loss, initial_loss,
                              interior_loss, inverse_shock_loss, shock_loss, total_loss)
from liftembed.problems import get_problem
from liftembed.sampling import sample_batch
from liftembed.shock_infer import SpeedGrid, grid_shock_points, integrate_curve, refresh_geometry
from liftembed.tape import TracedNetwork, Var, loss_param_grad, value_and_grad

from oracles import central_diff, rel_err


class Stub:
    """Plain function of (x..., t, phi) behind the traced-network interface."""

    def __init__(self, fn, grad=None):
        self.fn, self.grad, self.calls = fn, grad, 0

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        self.calls += X.shape[0]
        return self.fn(X)

    def with_input_grad(self, X, dims=None):
        X = np.asarray(X, dtype=float)
        self.calls += X.shape[0]
        dims = range(X.shape[1]) if dims is None else dims
        return self.fn(X), np.column_stack([self.grad(X, j) for j in dims])


def const(c):
    return Stub(lambda X: np.full(X.shape[0], float(c)), lambda X, j: np.zeros(X.shape[0]))


PLATEAU = Stub(lambda X: 2.0 - 2.0 * X[:, -1], lambda X, j: np.zeros(X.shape[0]) if j < 2 else -2.0 * np.ones(X.shape[0]))


def _batch(name, sizes=(2000, 500, 400, 400), seed=3):
    p = get_problem(name)
    g = build_geometry(p)
    return p, g, sample_batch(p, g, sizes, seed)


def test_constant_network_zero_interior():
    p, _, b = _batch("burgers_shock")
    assert float(interior_loss(const(0.7), p, b.interior)) == 0.0


def test_linear_ansatz_interior():
    p, _, b = _batch("convection_unit")
    lin = Stub(lambda X: X[:, 0] + X[:, 1], lambda X, j: np.ones(X.shape[0]) if j < 2 else np.zeros(X.shape[0]))
    assert float(interior_loss(lin, p, b.interior)) == 0.0
    p, _, b = _batch("burgers_shock")
    ux = Stub(lambda X: X[:, 0].copy(), lambda X, j: np.ones(X.shape[0]) if j == 0 else np.zeros(X.shape[0]))
    direct = sum(x * x for x in b.interior[:, 0]) / b.interior.shape[0]
    assert float(interior_loss(ux, p, b.interior)) == pytest.approx(direct, rel=1e-13)


def test_exact_plateaus_zero_on_burgers_shock():
    p, _, b = _batch("burgers_shock")
    assert float(interior_loss(PLATEAU, p, b.interior)) == 0.0
    assert float(shock_loss(PLATEAU, p, b.shock)) == 0.0
    assert float(boundary_loss(PLATEAU, p, b.boundary)) == 0.0
    assert float(initial_loss(PLATEAU, b.initial, b.u0)) == 0.0


def test_shock_loss_constant_network():
    p, _, b = _batch("burgers_shock")
    assert float(shock_loss(const(1.3), p, b.shock)) == 0.0
    p, _, b = _batch("convection_unit")
    assert float(shock_loss(const(1.3), p, b.shock)) == pytest.approx(1.0, abs=1e-15)


def test_shock_loss_two_evaluations_per_point():
    p, _, b = _batch("burgers_merging")
    net = nw.init_network(2, 5, 3, 0)
    tr = TracedNetwork(net, Var(net.params))
    shock_loss(tr, p, b.shock)
    assert tr.calls == 2 * b.shock.minus.shape[0]
    assert np.array_equal(b.shock.minus[:, :-1], b.shock.plus[:, :-1])
    assert np.all(b.shock.minus[:, -1] != b.shock.plus[:, -1])


def test_boundary_and_initial_examples():
    p, _, b = _batch("burgers_shock")
    assert float(boundary_loss(const(1.0), p, b.boundary)) == 1.0
    assert float(initial_loss(const(1.0), b.initial, b.u0)) == 1.0
    p, _, b = _batch("convection_unit")
    assert float(boundary_loss(const(-0.4), p, b.boundary)) == 0.0


def test_merging_initial_monte_carlo():
    p, _, b = _batch("burgers_merging", (10, 10, 10, 40000))
    sq = b.u0 ** 2
    got = float(initial_loss(const(0.0), b.initial, b.u0))
    se = sq.std(ddof=1) / np.sqrt(sq.size)
    assert abs(got - 13.0 / 9.0) <= 3 * se


def _inverse_setup(s_value):
    p = get_problem("burgers_inverse_const")
    grid = SpeedGrid.from_setup(p, s_init=1.0)
    curve = integrate_curve(grid)
    geom = refresh_geometry(p, curve)
    batch = sample_batch(p, geom, (100, 200, 100, 100), 0)
    pts, _ = grid_shock_points(p, curve)
    speeds = np.full(pts.minus.shape[0], s_value)
    return p, batch, pts, speeds


def test_inverse_shock_loss_examples():
    p, b, pts, s = _inverse_setup(1.0)
    assert float(inverse_shock_loss(PLATEAU, p, b.shock, s, pts)) == 0.0
    p, b, pts, s = _inverse_setup(0.0)
    assert float(inverse_shock_loss(PLATEAU, p, b.shock, s, pts)) == pytest.approx(4.0, abs=1e-14)
    assert float(inverse_shock_loss(const(0.3), p, b.shock, s, pts)) == 0.0


def test_inverse_shock_loss_speed_gradient():
    p, b, pts, _ = _inverse_setup(0.0)
    net = nw.init_network(2, 6, 3, 5)
    s0 = np.linspace(0.5, 1.5, pts.minus.shape[0])

    def f(tr, s):
        return inverse_shock_loss(tr, p, b.shock, s, pts)

    _, g_theta, (g_s,) = value_and_grad(f, net, s0)
    fd_s = central_diff(lambda s: inverse_shock_loss(net, p, b.shock, s, pts), s0, 1e-6)
    assert rel_err(g_s, fd_s, floor=1e-8) <= 1e-5
    fd_t = central_diff(lambda th: inverse_shock_loss(net.with_params(th), p, b.shock, s0, pts),
                        net.params, 1e-5)
    assert rel_err(g_theta, fd_t, floor=1e-8) <= 1e-5


def test_total_loss_arithmetic():
    ones = LossReport(1.0, 1.0, 1.0, 1.0, 0.0)
    assert total_loss(ones, LossWeights(400, 1, 400)) == 802
    assert total_loss(ones, LossWeights(400, 1, 400, w_int=300)) == 1101
    assert total_loss(LossReport(0, 0, 0, 0, 0), LossWeights(400, 1, 400)) == 0
    with pytest.raises(ConfigurationError):
        LossWeights(0, 1, 1)


@pytest.mark.parametrize("name", ["burgers_shock", "convection_unit", "burgers_2d"])
def test_assembled_gradient_matches_fd(name):
    p, _, b = _batch(name, (40, 20, 20, 20))
    net = nw.init_network(2, 6, p.input_dim, 1)
    w = LossWeights(3.0, 2.0, 5.0, 1.5)

    def traced(tr):
        return assemble(tr, p, b, w)[0]

    def plain(n):
        tr = TracedNetwork(n, Var(n.params))
        return float(assemble(tr, p, b, w)[0].value)

    g = loss_param_grad(net, traced)
    fd = central_diff(lambda th: plain(net.with_params(th)), net.params, 1e-5)
    assert rel_err(g, fd, floor=1e-7) <= 1e-5


def test_report_consistent_with_total():
    p, _, b = _batch("burgers_rarefaction", (200, 100, 100, 100))
    net = nw.init_network(2, 6, 3, 2)
    w = LossWeights.from_defaults(p.defaults)
    total, rep = assemble(TracedNetwork(net, Var(net.params)), p, b, w)
    assert rep.total == pytest.approx(total_loss(rep, w), rel=1e-13)
    assert rep.L_Intrr == pytest.approx(interior_loss(net, p, b.interior), rel=1e-13)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_losses_non_negative(seed):
    p, _, b = _batch("burgers_merging", (50, 30, 20, 20), seed=seed % 1000)
    net = nw.init_network(2, 4, 3, seed)
    _, rep = assemble(TracedNetwork(net, Var(net.params)), p, b, LossWeights(1, 1, 1))
    assert min(rep.L_Intrr, rep.L_Shock, rep.L_Bndry, rep.L_Initl) >= 0.0


def test_non_finite_residual_reports_point():
    p, _, b = _batch("burgers_shock", (10, 10, 10, 10))
    bad = Stub(lambda X: np.where(X[:, 0] > 0, np.nan, 0.0), lambda X, j: np.zeros(X.shape[0]))
    with pytest.raises(TrainingError, match="point"):
        initial_loss(bad, b.initial, b.u0)
