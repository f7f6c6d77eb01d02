from math import pi, sqrt

import numpy as np
import pytest

from liftembed.exceptions import UsageError
from liftembed.lifting import build_geometry, sampling_window
from liftembed.problems import exact, flux_and_prime, get_problem, problem_names, wrap_count

from oracles import one_sided

FORWARD = [n for n in problem_names() if not get_problem(n).is_inverse]


def test_registry_names():
    assert set(problem_names()) == {
        "convection_unit", "convection_alt_phi", "convection_fast", "burgers_shock", "burgers_merging",
        "burgers_rarefaction", "burgers_2d", "burgers_inverse_const", "burgers_inverse_curved"}


def test_unknown_problem_lists_names():
    with pytest.raises(UsageError, match="burgers_shock"):
        get_problem("nope")


@pytest.mark.parametrize("name, net, beta, sizes", [
    ("burgers_shock", (3, 40), (400, 1, 400), (10000, 1000, 1000, 1000)),
    ("burgers_2d", (4, 80), (50, 1, 400), (80000, 20000, 30000, 10000)),
    ("convection_fast", (6, 40), (400, 10, 400), (80000, 60000, 5000, 5000)),
    ("convection_unit", (2, 40), (400, 1, 400), (10000, 4000, 2000, 1000)),
    ("burgers_merging", (6, 40), (400, 1, 400), (80000, 15000, 5000, 5000)),
    ("burgers_rarefaction", (6, 40), (400, 1, 400), (80000, 10000, 10000, 5000)),
    ("burgers_inverse_curved", (6, 40), (50, 1, 400), (80000, 5000, 5000, 5000)),
])
def test_table_defaults(name, net, beta, sizes):
    d = get_problem(name).defaults
    assert (d.depth, d.width) == net
    assert (d.beta_s, d.beta_b, d.beta_i) == beta
    assert (d.n_intrr, d.n_shock, d.n_bndry, d.n_initl) == sizes


def test_test_grids_and_interior_weights():
    assert (get_problem("burgers_shock").defaults.test_nx, get_problem("burgers_shock").defaults.test_nt) == (1000, 1000)
    assert (get_problem("burgers_2d").defaults.test_nx, get_problem("burgers_2d").defaults.test_nt) == (1000, 17)
    assert get_problem("burgers_rarefaction").defaults.w_int == 300
    assert get_problem("burgers_inverse_curved").defaults.w_int == 100


def test_exact_examples():
    assert exact("burgers_shock", 0.5, 1.0) == 2.0
    assert exact("burgers_merging", 1.0, 0.5) == pytest.approx(1 / 1.5, abs=1e-15)
    assert exact("burgers_rarefaction", 0.5, 2.0) == pytest.approx(0.5, abs=1e-15)
    assert exact("burgers_2d", [1.5, 0.5], 0.1) == 2.0
    assert exact("convection_unit", pi, pi / 2) == 0.0
    assert exact("burgers_inverse_curved", 0.5, 0.5) == pytest.approx(4 * 0.5 / 3, abs=1e-15)


def test_exact_right_limit_on_shock():
    assert exact("burgers_shock", 0.5, 0.5) == 0.0
    assert exact("burgers_2d", [1.3, 0.2], 0.1) == 2.0


def test_exact_out_of_domain():
    with pytest.raises(UsageError):
        exact("burgers_shock", 1.5, 0.5)
    with pytest.raises(UsageError):
        exact("burgers_shock", 0.0, -0.1)


def test_flux_examples():
    f, fp = flux_and_prime("convection_unit", 3.0)
    assert (f[0], fp[0]) == (-3.0, -1.0)
    f, fp = flux_and_prime("burgers_shock", 2.0)
    assert (f[0], fp[0]) == (2.0, 2.0)
    f, fp = flux_and_prime("burgers_rarefaction", 2.0)
    assert (f[0], fp[0]) == (1.0, 1.0)


def test_wrap_count():
    assert wrap_count(-1.0, 2 * pi, 2 * pi / 3) == 1


def _jump_points(problem):
    out = []
    for x_i, _ in problem.initial_jumps:
        out.append(x_i)
    if problem.name.startswith("burgers_shock") or problem.name == "burgers_inverse_const":
        out.append(0.0)
    if problem.name == "burgers_merging":
        out += [1.0, 2.0]
    if problem.name == "burgers_rarefaction":
        out += [0.0, 1.0]
    if problem.name == "burgers_2d":
        out += [1.0, 2.0]
    if problem.name == "burgers_inverse_curved":
        out.append(1.0)
    return np.array(out)


@pytest.mark.parametrize("name", problem_names())
def test_initial_data_consistency(name, rng):
    p = get_problem(name)
    X = np.column_stack([rng.uniform(lo, hi, 1000) for lo, hi in p.bounds])
    jumps = _jump_points(p)
    keep = np.min(np.abs(X[:, :1] - jumps[None, :]), axis=1) > 1e-9
    X = X[keep]
    u = p.exact_solution(X, np.zeros(X.shape[0]))
    assert np.max(np.abs(u - p.initial(X))) <= 1e-12


def _shock_distance(problem, X, t):
    if problem.is_inverse:
        return np.abs(X[:, 0] - problem.true_shock(t))
    geom = build_geometry(problem)
    d = np.full(X.shape[0], np.inf)
    for s in geom.sheets:
        act = s.active(t)
        d = np.where(act, np.minimum(d, np.abs(s.signed_distance(X, t))), d)
    return d


@pytest.mark.parametrize("name", problem_names())
def test_off_shock_pde_residual(name, rng):
    p = get_problem(name)
    n = 4000
    X = np.column_stack([rng.uniform(lo + 1e-3, hi - 1e-3, n) for lo, hi in p.bounds])
    t = rng.uniform(0.05 * p.T, p.T * 0.999, n)
    keep = _shock_distance(p, X, t) >= 0.05
    if name == "burgers_rarefaction":
        # stay off the fan edges x = 0 and x = t/2 where u is only Lipschitz
        keep &= (np.abs(X[:, 0]) >= 0.05) & (np.abs(X[:, 0] - t / 2) >= 0.05)
    if name == "burgers_merging":
        from liftembed.problems import merge_point
        keep &= np.abs(t - merge_point()[1]) >= 0.05
    X, t = X[keep][:1000], t[keep][:1000]
    h = 1e-6
    ut = (p.exact_solution(X, t + h) - p.exact_solution(X, t - h)) / (2 * h)
    res = ut
    for j in range(p.spatial_dim):
        e = np.zeros(p.spatial_dim)
        e[j] = h
        fp = p.flux(p.exact_solution(X + e, t))[j]
        fm = p.flux(p.exact_solution(X - e, t))[j]
        res = res + (fp - fm) / (2 * h)
    assert np.max(np.abs(res)) <= 1e-5


@pytest.mark.parametrize("name", [n for n in FORWARD if not n.startswith("convection")])
def test_rankine_hugoniot_on_exact_solutions(name, rng):
    p = get_problem(name)
    geom = build_geometry(p)
    for sheet in geom.sheets:
        window = sampling_window(sheet, p)
        t = rng.uniform(*window, 1000)
        if sheet.degenerate_times:
            t = t[np.abs(t - sheet.degenerate_times[0]) > 1e-4]
        nu = np.asarray(sheet.normal)
        worst = 0.0
        for tk in t:
            x = np.array([rng.uniform(lo, hi) for lo, hi in p.bounds])
            x[0] = sheet.gamma(tk)
            um, up = one_sided(p.exact_solution, x, tk, nu)
            fm, fp = p.flux(um), p.flux(up)
            res = sheet.speed(tk) * (up - um) - sum(nu[j] * (fp[j] - fm[j]) for j in range(p.spatial_dim))
            worst = max(worst, abs(res))
        assert worst <= 1e-10, (sheet.id, worst)


def test_rankine_hugoniot_curved_inverse(rng):
    p = get_problem("burgers_inverse_curved")
    for tk in rng.uniform(0, p.T, 1000):
        g = float(p.true_shock(tk))
        um, up = one_sided(p.exact_solution, np.array([g]), tk, np.array([1.0]))
        s = 2.0 / sqrt(1 + 4 * tk)
        assert abs(s * (up - um) - (0.5 * up * up - 0.5 * um * um)) <= 1e-6


def test_convection_periodic(rng):
    for name in ("convection_unit", "convection_fast"):
        p = get_problem(name)
        t = rng.uniform(0, p.T, 1000)
        left = p.exact_solution(np.zeros((1000, 1)), t)
        right = p.exact_solution(np.full((1000, 1), 2 * pi), t)
        assert np.array_equal(left, right)
