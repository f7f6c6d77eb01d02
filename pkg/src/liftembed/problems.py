"""Registry of benchmark scalar conservation laws.

Every problem carries its flux, initial and boundary data, a closed-form
exact solution, and the default network/penalty/batch configuration used to
train it. Exact solutions return the right limit on a discontinuity, which
matches the ``H(0) = 1`` convention of the augmented variable.
"""

from dataclasses import dataclass, field
from math import ceil, pi, sqrt

import numpy as np

from .exceptions import UsageError

DOMAIN_TOL = 1e-12


@dataclass(frozen=True)
class Defaults:
    depth: int
    width: int
    beta_s: float
    beta_b: float
    beta_i: float
    n_intrr: int
    n_shock: int
    n_bndry: int
    n_initl: int
    test_nx: int = 1000
    test_nt: int = 1000
    w_int: float = 1.0
    epochs: int = 20000


@dataclass(frozen=True)
class InverseSetup:
    """Shock-speed inference settings for problems with unknown geometry.

    ``mode`` is ``"constant"`` (one trainable speed) or ``"grid"`` (one speed
    per node of a uniform time grid with spacing ``h``). ``hypothesis`` is the
    slope ``c`` of an affine trajectory hypothesis, or None.
    """

    mode: str
    x0: float
    s_init: float
    h: float = 1.0 / 50.0
    hypothesis: float = None


@dataclass(frozen=True)
class Boundary:
    """``kind`` is ``"dirichlet"`` (faces listed), ``"periodic"`` (axis paired) or ``"exact"``.

    Faces are ``(axis, side)`` with side 0 for the lower bound and 1 for the upper.
    Dirichlet data always come from the exact solution.
    """

    kind: str
    faces: tuple = ()
    axis: int = 0


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    spatial_dim: int
    bounds: tuple
    T: float
    flux: object = field(repr=False)
    flux_prime: object = field(repr=False)
    initial: object = field(repr=False)
    exact_solution: object = field(repr=False)
    boundary: Boundary
    defaults: Defaults
    description: str = ""
    inverse: InverseSetup = None
    true_shock: object = field(default=None, repr=False)
    initial_jumps: tuple = ()

    @property
    def is_inverse(self):
        return self.inverse is not None

    @property
    def input_dim(self):
        return self.spatial_dim + 2

    def faces(self):
        """Boundary faces ``(axis, side)`` where data are imposed or paired."""
        if self.boundary.kind == "exact":
            return tuple((a, s) for a in range(self.spatial_dim) for s in (0, 1))
        if self.boundary.kind == "periodic":
            return ((self.boundary.axis, 0), (self.boundary.axis, 1))
        return self.boundary.faces

    def boundary_data(self, X, t):
        return self.exact_solution(X, t)


def _square_wave(x):
    x = np.asarray(x, dtype=np.float64)
    return ((x >= 2 * pi / 3) & (x < 4 * pi / 3)).astype(np.float64)


def wrap_count(speed, T, x_i, period=2 * pi):
    """Number of extra periodic images ``ceil(-(s T + x_i) / period)`` a left-moving sheet needs."""
    return int(ceil(-(speed * T + x_i) / period))


def _convection(name, coeff, T, defaults, description, transported=False):
    # f(u) = -coeff * u  =>  u_t - coeff u_x = 0, transported to the left.
    # Evaluating u0 at (x + coeff t) mod 2 pi rounds differently from the sheets on
    # grid nodes that sit exactly on one. Summing periodic images with the same
    # arithmetic as the lifting keeps those nodes on the right-limit side.
    s = -coeff
    images = [(x_i + 2 * k * pi, jump) for x_i, jump in ((2 * pi / 3, 1.0), (4 * pi / 3, -1.0))
              for k in range(wrap_count(s, T, x_i) + 1)]
    n_wrap = wrap_count(s, T, 2 * pi / 3)

    def exact(X, t):
        x = np.asarray(X, dtype=np.float64)[:, 0]
        t = np.asarray(t, dtype=np.float64)
        if transported:
            shifted = x - s * t
            return sum(_square_wave(shifted - k * (2 * pi)) for k in range(n_wrap + 1))
        u = np.zeros_like(x)
        for offset, jump in images:
            u += jump * (x - (offset + s * t) >= 0.0)
        return u

    return ProblemSpec(
        name=name,
        spatial_dim=1,
        bounds=((0.0, 2 * pi),),
        T=T,
        flux=lambda u: [-coeff * u],
        flux_prime=lambda u: [-coeff],
        initial=lambda X: _square_wave(X[:, 0]),
        exact_solution=exact,
        boundary=Boundary("periodic", axis=0),
        defaults=defaults,
        description=description,
        initial_jumps=((2 * pi / 3, 1.0), (4 * pi / 3, -1.0)),
    )


def _burgers_flux(u):
    return [0.5 * u * u]


def _burgers_prime(u):
    return [u]


def _shock_exact(X, t):
    return np.where(X[:, 0] < t, 2.0, 0.0)


def _shock_initial(X):
    return np.where(X[:, 0] < 0.0, 2.0, 0.0)


def merge_point():
    """Space-time point where the two shocks of ``burgers_merging`` collide."""
    return (sqrt(13.0) - 1.0) / 2.0, (5.0 - sqrt(13.0)) / 2.0


def merging_curves():
    """``(gamma_1, gamma_2, gamma_3)`` and their speeds for ``burgers_merging``."""
    g1 = lambda t: np.sqrt(1.0 + t)
    g2 = lambda t: 2.0 - t
    g3 = lambda t: np.sqrt(13.0 * (1.0 + t)) - 2.0 * (1.0 + t)
    s1 = lambda t: 0.5 / np.sqrt(1.0 + t)
    s2 = lambda t: -1.0 + 0.0 * t
    s3 = lambda t: 0.5 * (g3(t) / (1.0 + t) - 2.0)
    return (g1, s1), (g2, s2), (g3, s3)


def _merging_initial(X):
    x = X[:, 0]
    return np.where(x < 1.0, x, np.where(x < 2.0, 0.0, -2.0))


def _merging_exact(X, t):
    x = X[:, 0]
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), x.shape)
    (g1, _), (g2, _), (g3, _) = merging_curves()
    _, t_star = merge_point()
    fan = x / (1.0 + t)
    before = np.where(x < g1(t), fan, np.where(x < g2(t), 0.0, -2.0))
    after = np.where(x < g3(t), fan, -2.0)
    return np.where(t <= t_star, before, after)


def rarefaction_curve(t):
    t = np.asarray(t, dtype=np.float64)
    return np.where(t <= 4.0, 0.25 * t + 1.0, np.sqrt(np.maximum(t, 0.0)))


def rarefaction_speed(t):
    t = np.asarray(t, dtype=np.float64)
    return np.where(t <= 4.0, 0.25, 0.5 / np.sqrt(np.maximum(t, 4.0)))


def _rarefaction_initial(X):
    x = X[:, 0]
    return np.where((x >= 0.0) & (x < 1.0), 1.0, 0.0)


def _rarefaction_exact(X, t):
    x = X[:, 0]
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), x.shape)
    gamma = rarefaction_curve(t)
    with np.errstate(divide="ignore", invalid="ignore"):
        fan = np.where(t > 0, 2.0 * x / np.where(t > 0, t, 1.0), 0.0)
    inner = np.where(x < 0.5 * t, fan, 1.0)
    u = np.where(x < 0.0, 0.0, np.where(x < gamma, inner, 0.0))
    return np.where(t > 0, u, _rarefaction_initial(X))


def _burgers2d_exact(X, t):
    x = X[:, 0]
    return np.where(x < 1.0 + 3.0 * t, 4.0, np.where(x < 2.0 + 0.5 * t, 2.0, -1.0))


def _curved_initial(X):
    x = X[:, 0]
    return np.where(x < 1.0, 4.0 * x, 0.0)


def curved_shock(t):
    return np.sqrt(1.0 + 4.0 * np.asarray(t, dtype=np.float64))


def _curved_exact(X, t):
    x = X[:, 0]
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), x.shape)
    return np.where(x < curved_shock(t), 4.0 * x / (1.0 + 4.0 * t), 0.0)


def _build_registry():
    two_pi = 2 * pi
    probs = [
        _convection(
            "convection_unit", 1.0, two_pi,
            Defaults(2, 40, 400, 1, 400, 10000, 4000, 2000, 1000),
            "u_t - u_x = 0 on (0, 2pi), square wave, periodic",
        ),
        _convection(
            "convection_alt_phi", 1.0, two_pi,
            Defaults(2, 40, 400, 1, 400, 10000, 4000, 2000, 1000),
            "u_t - u_x = 0, lifted with the transported initial profile",
            transported=True,
        ),
        _convection(
            "convection_fast", 50.0, pi / 5,
            Defaults(6, 40, 400, 10, 400, 80000, 60000, 5000, 5000, epochs=50000),
            "u_t - 50 u_x = 0 on (0, 2pi) x (0, pi/5], periodic",
        ),
        ProblemSpec(
            name="burgers_shock", spatial_dim=1, bounds=((-1.0, 1.0),), T=1.0,
            flux=_burgers_flux, flux_prime=_burgers_prime,
            initial=_shock_initial, exact_solution=_shock_exact,
            boundary=Boundary("dirichlet", faces=((0, 0), (0, 1))),
            defaults=Defaults(3, 40, 400, 1, 400, 10000, 1000, 1000, 1000),
            description="u_t + u u_x = 0, u0 = 2H(-x), shock along x = t",
        ),
        ProblemSpec(
            name="burgers_merging", spatial_dim=1, bounds=((0.0, 3.0),), T=2.0,
            flux=_burgers_flux, flux_prime=_burgers_prime,
            initial=_merging_initial, exact_solution=_merging_exact,
            boundary=Boundary("dirichlet", faces=((0, 0), (0, 1))),
            defaults=Defaults(6, 40, 400, 1, 400, 80000, 15000, 5000, 5000, epochs=50000),
            description="two shocks merging into one",
        ),
        ProblemSpec(
            name="burgers_rarefaction", spatial_dim=1, bounds=((-1.0, 6.0),), T=10.0,
            flux=lambda u: [0.25 * u * u], flux_prime=lambda u: [0.5 * u],
            initial=_rarefaction_initial, exact_solution=_rarefaction_exact,
            boundary=Boundary("dirichlet", faces=((0, 0), (0, 1))),
            defaults=Defaults(6, 40, 400, 1, 400, 80000, 10000, 10000, 5000, w_int=300, epochs=50000),
            description="rarefaction fan overtaking a shock, f = u^2/4",
        ),
        ProblemSpec(
            name="burgers_2d", spatial_dim=2, bounds=((0.0, 3.0), (0.0, 1.0)), T=0.4,
            flux=lambda u: [0.5 * u * u, 0.5 * u * u], flux_prime=lambda u: [u, u],
            initial=lambda X: _burgers2d_exact(X, 0.0), exact_solution=_burgers2d_exact,
            boundary=Boundary("exact"),
            defaults=Defaults(4, 80, 50, 1, 400, 80000, 20000, 30000, 10000, test_nx=1000, test_nt=17,
                              epochs=50000),
            description="planar shocks x = 1 + 3t and x = 2 + t/2 in two dimensions",
        ),
        ProblemSpec(
            name="burgers_inverse_const", spatial_dim=1, bounds=((-1.0, 1.0),), T=1.0,
            flux=_burgers_flux, flux_prime=_burgers_prime,
            initial=_shock_initial, exact_solution=_shock_exact,
            boundary=Boundary("dirichlet", faces=((0, 0), (0, 1))),
            defaults=Defaults(4, 40, 400, 1, 400, 10000, 1000, 1000, 1000),
            description="burgers_shock with the shock speed inferred",
            inverse=InverseSetup("constant", x0=0.0, s_init=-5.0),
            true_shock=lambda t: np.asarray(t, dtype=np.float64),
        ),
        ProblemSpec(
            name="burgers_inverse_curved", spatial_dim=1, bounds=((0.0, 2.0),), T=0.5,
            flux=_burgers_flux, flux_prime=_burgers_prime,
            initial=_curved_initial, exact_solution=_curved_exact,
            boundary=Boundary("dirichlet", faces=((0, 0), (0, 1))),
            defaults=Defaults(6, 40, 50, 1, 400, 80000, 5000, 5000, 5000, w_int=100, epochs=50000),
            description="curved shock sqrt(1 + 4t) inferred on a time grid",
            inverse=InverseSetup("grid", x0=1.0, s_init=0.0, h=1.0 / 50.0, hypothesis=0.5),
            true_shock=curved_shock,
        ),
    ]
    return {p.name: p for p in probs}


REGISTRY = _build_registry()


def problem_names():
    return tuple(REGISTRY)


def get_problem(name):
    try:
        return REGISTRY[name]
    except KeyError:
        raise UsageError(
            f"unknown problem {name!r}; valid names: {', '.join(REGISTRY)}"
        ) from None


def _resolve(problem):
    return get_problem(problem) if isinstance(problem, str) else problem


def check_in_domain(problem, X, t):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    t = np.asarray(t, dtype=np.float64)
    for axis, (lo, hi) in enumerate(problem.bounds):
        col = X[:, axis]
        if np.any(col < lo - DOMAIN_TOL) or np.any(col > hi + DOMAIN_TOL):
            raise UsageError(f"{problem.name}: x[{axis}] outside [{lo}, {hi}]")
    if np.any(t < -DOMAIN_TOL) or np.any(t > problem.T + DOMAIN_TOL):
        raise UsageError(f"{problem.name}: t outside [0, {problem.T}]")


def exact(problem, x, t):
    """Exact solution at ``(x, t)``; scalars in give a float back.

    ``x`` is a scalar or length-d vector for one point, or an ``(n, d)``
    array (``(n,)`` when d = 1) for a batch with ``t`` broadcast to n.
    """
    problem = _resolve(problem)
    d = problem.spatial_dim
    scalar = np.ndim(t) == 0 and np.size(x) == d
    X = np.asarray(x, dtype=np.float64).reshape(-1, d)
    tt = np.broadcast_to(np.asarray(t, dtype=np.float64), (X.shape[0],))
    check_in_domain(problem, X, tt)
    u = problem.exact_solution(X, tt)
    return float(u[0]) if scalar else u


def flux_and_prime(problem, u):
    """``(f_j(u) for each j, f_j'(u) for each j)`` as float arrays."""
    problem = _resolve(problem)
    u = np.asarray(u, dtype=np.float64)
    f = [np.broadcast_to(np.asarray(v, dtype=np.float64), u.shape).copy() for v in problem.flux(u)]
    fp = [np.broadcast_to(np.asarray(v, dtype=np.float64), u.shape).copy() for v in problem.flux_prime(u)]
    return np.array(f), np.array(fp)

