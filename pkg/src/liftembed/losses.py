"""Residual losses of the lifted problem.

Each loss accepts either a :class:`~liftembed.network.Network` (returns a
float) or a traced network from :mod:`liftembed.tape` (returns a tape
``Var`` for differentiation). Any object exposing ``__call__(X)`` and
``with_input_grad(X, dims)`` with the traced-network semantics works too.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, TrainingError
from .network import Network
from .sampling import KIND_RH
from .tape import TracedNetwork, Var, value, where


@dataclass(frozen=True)
class LossWeights:
    beta_s: float
    beta_b: float
    beta_i: float
    w_int: float = 1.0

    def __post_init__(self):
        for name in ("beta_s", "beta_b", "beta_i", "w_int"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ConfigurationError(f"loss weight {name} must be positive, got {v}")

    @classmethod
    def from_defaults(cls, defaults):
        return cls(defaults.beta_s, defaults.beta_b, defaults.beta_i, defaults.w_int)


@dataclass(frozen=True)
class LossReport:
    L_Intrr: float
    L_Shock: float
    L_Bndry: float
    L_Initl: float
    total: float
    L_Shock_inv: float = None


def _traced(net):
    if isinstance(net, Network):
        return TracedNetwork(net, Var(net.params)), True
    return net, False


def _out(loss, plain):
    return float(value(loss)) if plain else loss


def _check_finite(res, term, X):
    r = np.asarray(value(res))
    bad = np.flatnonzero(~np.isfinite(r))
    if bad.size:
        raise TrainingError(f"non-finite {term} residual at point {np.asarray(X)[bad[0]].tolist()}",
                            term=term)


def _mean_sq(res):
    return (res ** 2).mean()


def interior_loss(net, problem, X):
    """Mean squared residual of ``u_t + sum_j f_j'(u) u_{x_j}``."""
    tr, plain = _traced(net)
    d = problem.spatial_dim
    u, du = tr.with_input_grad(X, dims=tuple(range(d + 1)))
    res = du[:, d]
    for j, fp in enumerate(problem.flux_prime(u)):
        res = res + fp * du[:, j]
    _check_finite(res, "interior", X)
    return _out(_mean_sq(res), plain)


def _shock_residual(tr, problem, shock, speed=None):
    u_m = tr(shock.minus)
    u_p = tr(shock.plus)
    ju = u_p - u_m
    s = shock.speed if speed is None else speed
    rh = s * ju
    for j, (f_p, f_m) in enumerate(zip(problem.flux(u_p), problem.flux(u_m))):
        nu = shock.normal[:, j]
        if np.any(nu):
            rh = rh - nu * (f_p - f_m)
    kind = shock.kind
    if np.all(kind == KIND_RH):
        return rh
    jump = ju - shock.jump
    if not np.any(kind == KIND_RH):
        return jump
    return where(kind == KIND_RH, rh, jump)


def shock_loss(net, problem, shock):
    """Mean squared jump-constraint residual; two network passes per point."""
    tr, plain = _traced(net)
    res = _shock_residual(tr, problem, shock)
    _check_finite(res, "shock", shock.minus)
    return _out(_mean_sq(res), plain)


def boundary_loss(net, problem, boundary):
    tr, plain = _traced(net)
    if boundary.periodic:
        res = tr(boundary.X) - tr(boundary.X_pair)
    else:
        res = tr(boundary.X) - boundary.g
    _check_finite(res, "boundary", boundary.X)
    return _out(_mean_sq(res), plain)


def initial_loss(net, X, u0):
    tr, plain = _traced(net)
    res = tr(X) - u0
    _check_finite(res, "initial", X)
    return _out(_mean_sq(res), plain)


def speed_grid_loss(net, problem, speeds, grid):
    """Grid term ``mean |s_i [u]_i - [f(u)]_i|^2`` that trains the speeds."""
    tr, plain = _traced(net)
    s = speeds if isinstance(speeds, Var) else np.asarray(speeds, dtype=np.float64)
    res = _shock_residual(tr, problem, grid, speed=s)
    _check_finite(res, "inverse shock", grid.minus)
    return _out(_mean_sq(res), plain)


def inverse_shock_loss(net, problem, shock, speeds, grid):
    """``L_Shock`` plus :func:`speed_grid_loss`.

    ``grid`` holds shock points on the current curve estimate at the speed-grid
    nodes; ``speeds`` is a tape leaf (or array) of length n or 1.
    """
    tr, plain = _traced(net)
    loss = shock_loss(tr, problem, shock) + speed_grid_loss(tr, problem, speeds, grid)
    return _out(loss, plain)


def total_loss(report, weights):
    shock = report.L_Shock if report.L_Shock_inv is None else report.L_Shock_inv
    return (weights.w_int * report.L_Intrr + weights.beta_s * shock
            + weights.beta_b * report.L_Bndry + weights.beta_i * report.L_Initl)


def assemble(traced, problem, batch, weights, speeds=None, grid=None):
    """Weighted total as a tape ``Var`` plus the per-term report."""
    L_i = interior_loss(traced, problem, batch.interior)
    L_b = boundary_loss(traced, problem, batch.boundary)
    L_0 = initial_loss(traced, batch.initial, batch.u0)
    if grid is None:
        L_s = shock_loss(traced, problem, batch.shock)
        L_inv = None
        shock_term = L_s
    else:
        L_s = shock_loss(traced, problem, batch.shock)
        L_inv = L_s + speed_grid_loss(traced, problem, speeds, grid)
        shock_term = L_inv
    total = weights.w_int * L_i + weights.beta_s * shock_term + weights.beta_b * L_b + weights.beta_i * L_0
    report = LossReport(float(value(L_i)), float(value(L_s)), float(value(L_b)), float(value(L_0)),
                        float(value(total)), None if L_inv is None else float(value(L_inv)))
    return total, report
