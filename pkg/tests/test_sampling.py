import numpy as np
import pytest
from hypothesis import given, strategies as st

from liftembed.exceptions import UsageError
from liftembed.lifting import build_geometry, phi_batch, phi_limits, ON_SHEET_TOL
from liftembed.problems import get_problem, merge_point, problem_names
from liftembed.sampling import KIND_JUMP, minibatch, sample_batch

FORWARD = [n for n in problem_names() if not get_problem(n).is_inverse]


def _batch(name, sizes, seed=1):
    p = get_problem(name)
    g = build_geometry(p)
    return p, g, sample_batch(p, g, sizes, seed)


def _check_invariants(p, g, b):
    d = p.spatial_dim
    X, t = b.interior[:, :d], b.interior[:, d]
    assert np.all(t > 0) and np.all(t <= p.T)
    for sheet in g.sheets:
        dist = np.abs(sheet.signed_distance(X, t))
        assert np.all(~sheet.active(t) | (dist > ON_SHEET_TOL))
    assert np.array_equal(b.interior[:, -1], phi_batch(g, X, t))
    sh = b.shock
    for k, sheet in enumerate(g.sheets):
        rows = sh.minus[sh.sheet == k]
        if rows.size == 0:
            continue
        assert np.all(np.abs(sheet.signed_distance(rows[:, :d], rows[:, d])) <= ON_SHEET_TOL)
        assert np.all(sheet.active(rows[:, d]))
    assert np.array_equal(sh.minus[:, :-1], sh.plus[:, :-1])


def test_burgers_shock_batch_counts_and_invariants():
    p, g, b = _batch("burgers_shock", (10000, 1000, 1000, 1000))
    assert b.sizes == (10000, 1000, 1000, 1000)
    _check_invariants(p, g, b)
    assert set(np.unique(b.boundary.X[:, 0])) == {-1.0, 1.0}
    assert np.all(b.initial[:, 1] == 0.0)


@pytest.mark.parametrize("name", FORWARD)
def test_invariants_all_problems(name):
    p = get_problem(name)
    p, g, b = _batch(name, (2000, 600, 300, 200))
    assert b.sizes == (2000, 600, 300, 200)
    _check_invariants(p, g, b)


@pytest.mark.parametrize("name", ["burgers_shock", "convection_unit", "burgers_2d"])
def test_same_seed_bitwise_identical(name):
    _, _, a = _batch(name, (500, 100, 100, 100), seed=7)
    _, _, b = _batch(name, (500, 100, 100, 100), seed=7)
    assert np.array_equal(a.interior, b.interior)
    assert np.array_equal(a.shock.minus, b.shock.minus) and np.array_equal(a.shock.speed, b.shock.speed)
    assert np.array_equal(a.boundary.X, b.boundary.X) and np.array_equal(a.initial, b.initial)


def test_merging_shock_points_avoid_merge_instant():
    p, g, b = _batch("burgers_merging", (100, 300, 10, 10))
    t = b.shock.minus[:, 1]
    assert np.all(np.abs(t - merge_point()[1]) >= 1e-9)
    pairs = set(zip(b.shock.minus[:, -1], b.shock.plus[:, -1]))
    assert pairs <= {(0.0, 1.0), (1.0, 2.0), (0.0, 2.0)}
    for row_m, k in zip(b.shock.minus[:20], b.shock.sheet[:20]):
        lo, hi, s, _, _ = phi_limits(g.sheets[k], row_m[:2])
        assert (lo, hi) == (row_m[-1], b.shock.plus[0, -1] if False else hi)


def test_shock_levels_agree_with_phi_limits():
    p, g, b = _batch("convection_unit", (10, 400, 10, 10))
    sh = b.shock
    for i in range(0, 400, 37):
        lo, hi, s, nu, c = phi_limits(g.sheets[sh.sheet[i]], sh.minus[i, :2])
        assert (lo, hi, s) == (sh.minus[i, -1], sh.plus[i, -1], sh.speed[i])
        assert sh.kind[i] == KIND_JUMP and sh.jump[i] == c.jump


def test_shock_allocation_proportional_to_time_extent():
    p, g, b = _batch("convection_unit", (10, 4000, 10, 10))
    counts = np.bincount(b.shock.sheet)
    assert counts.tolist() == [667, 1333, 1333, 667]


def test_periodic_pairs_share_time():
    p, g, b = _batch("convection_unit", (10, 10, 500, 10))
    bd = b.boundary
    assert bd.periodic
    assert np.array_equal(bd.X[:, 1], bd.X_pair[:, 1])
    assert np.all(bd.X[:, 0] == 0.0) and np.all(bd.X_pair[:, 0] == 2 * np.pi)


def test_uniformity_smoke():
    p, g, b = _batch("burgers_shock", (100000, 10, 10, 10))
    assert abs(np.mean(b.interior[:, 0] < 0.0) - 0.5) <= 0.01
    assert abs(np.mean(b.interior[:, 1] < 0.5) - 0.5) <= 0.01


def test_bad_sizes_and_mismatch():
    p = get_problem("burgers_shock")
    with pytest.raises(UsageError):
        sample_batch(p, build_geometry(p), (10, 0, 10, 10), 0)
    with pytest.raises(UsageError):
        sample_batch(p, build_geometry("burgers_2d"), (10, 10, 10, 10), 0)


def test_minibatch_contract():
    _, _, b = _batch("burgers_shock", (1000, 1000, 1000, 1000))
    assert minibatch(b, 1.0, 0, 0) is b
    half = minibatch(b, 0.5, 3, 11)
    assert half.sizes == (500, 500, 500, 500)
    assert np.unique(half.interior, axis=0).shape[0] == 500
    again = minibatch(b, 0.5, 3, 11)
    assert np.array_equal(half.interior, again.interior)
    with pytest.raises(UsageError):
        minibatch(b, 0.0, 0, 0)


@given(fraction=st.floats(0.01, 1.0), epoch=st.integers(0, 10**6))
def test_minibatch_rows_come_from_batch(fraction, epoch):
    _, _, b = _batch("burgers_shock", (200, 50, 50, 50))
    mb = minibatch(b, fraction, 5, epoch)
    rows = {tuple(r) for r in b.interior}
    assert all(tuple(r) in rows for r in mb.interior)
    assert mb.interior.shape[0] == max(1, int(round(fraction * 200)))
