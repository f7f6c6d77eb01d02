"""Trainable shock speeds and the curve they generate.

The speeds live on a uniform time grid (or as one scalar). Each epoch the
curve ``gamma' = s`` is integrated with RK4 from the anchor ``x0``, and a
single-sheet geometry is rebuilt from it.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator
from scipy.optimize import brentq

from .exceptions import ConfigurationError, DivergedInferenceError, UsageError
from .lifting import RankineHugoniot, ShockGeometry, ShockSheet
from .sampling import KIND_RH, ShockPoints


@dataclass
class SpeedGrid:
    """Speeds ``s_i`` on ``t_i = i h``; ``mode="constant"`` keeps one shared value.

    ``hypothesis`` is the slope ``c`` of the affine offset ``gamma = c t + gamma_bar``.
    """

    T: float
    h: float
    x0: float
    values: np.ndarray
    mode: str = "grid"
    hypothesis: float = None

    def __post_init__(self):
        if self.mode not in ("grid", "constant"):
            raise ConfigurationError(f"speed mode must be 'grid' or 'constant', got {self.mode!r}")
        if not (self.h > 0 and self.T > 0):
            raise ConfigurationError("T and h must be positive")
        steps = self.T / self.h
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ConfigurationError(f"h = {self.h} does not divide T = {self.T}")
        self.values = np.atleast_1d(np.asarray(self.values, dtype=np.float64)).copy()
        if self.values.shape != (self.n_trainable,):
            raise ConfigurationError(
                f"{self.mode} mode needs {self.n_trainable} speed values, got {self.values.shape[0]}"
            )

    @classmethod
    def from_setup(cls, problem, s_init=None):
        setup = problem.inverse
        if setup is None:
            raise UsageError(f"{problem.name} is not an inverse problem")
        s0 = setup.s_init if s_init is None else s_init
        n = int(round(problem.T / setup.h)) + 1
        count = 1 if setup.mode == "constant" else n
        return cls(problem.T, setup.h, setup.x0, np.full(count, float(s0)), setup.mode, setup.hypothesis)

    @property
    def n_nodes(self):
        return int(round(self.T / self.h)) + 1

    @property
    def n_trainable(self):
        return 1 if self.mode == "constant" else self.n_nodes

    @property
    def nodes(self):
        # nodes are i*h exactly, with the last one pinned to T
        t = np.arange(self.n_nodes) * self.h
        t[-1] = self.T
        return t

    def node_speeds(self):
        return np.broadcast_to(self.values, (self.n_nodes,)).copy()

    def with_values(self, values):
        return SpeedGrid(self.T, self.h, self.x0, values, self.mode, self.hypothesis)


@dataclass(frozen=True)
class CurveEstimate:
    nodes: np.ndarray
    gamma_nodes: np.ndarray
    speed_nodes: np.ndarray
    gamma_fn: object = field(repr=False)
    speed_fn: object = field(repr=False)
    T: float = 1.0

    def gamma(self, t):
        return self.gamma_fn(np.clip(np.asarray(t, dtype=np.float64), 0.0, self.T))

    def speed(self, t):
        return self.speed_fn(np.clip(np.asarray(t, dtype=np.float64), 0.0, self.T))


def _speed_interpolant(grid):
    if grid.mode == "constant":
        c = float(grid.values[0])
        return lambda t: np.full(np.shape(t), c) if np.ndim(t) else c
    return PchipInterpolator(grid.nodes, grid.values, extrapolate=True)


def integrate_curve(grid):
    """RK4 for ``gamma' = s`` (or ``gamma_bar' = s - c`` with an affine offset).

    Midpoint speeds come from the piecewise-cubic Hermite speed interpolant.
    """
    s_fn = _speed_interpolant(grid)
    t = grid.nodes
    c = 0.0 if grid.hypothesis is None else float(grid.hypothesis)
    rhs = lambda tt: s_fn(tt) - c
    bar = np.empty_like(t)
    bar[0] = grid.x0
    for i in range(t.size - 1):
        h = t[i + 1] - t[i]
        k1 = rhs(t[i])
        k2 = rhs(t[i] + 0.5 * h)
        k4 = rhs(t[i + 1])
        # k3 equals k2 since the right-hand side does not depend on the state
        bar[i + 1] = bar[i] + h / 6.0 * (k1 + 4.0 * k2 + k4)
    gamma = c * t + bar
    gamma[0] = grid.x0
    speeds = np.asarray(s_fn(t), dtype=np.float64) * np.ones_like(t)
    gamma_fn = CubicHermiteSpline(t, gamma, speeds, extrapolate=True)
    return CurveEstimate(t, gamma, speeds, gamma_fn, s_fn, grid.T)


def exit_time(problem, curve, samples=2001):
    """First time the curve leaves the closed spatial interval, or None.

    Touching the boundary (as the true curve does at ``T`` on burgers_shock)
    is not an exit.
    """
    lo, hi = problem.bounds[0]
    ts = np.linspace(0.0, curve.T, samples)
    g = curve.gamma(ts)
    tol = 1e-12 * max(1.0, hi - lo)
    out = (g < lo - tol) | (g > hi + tol)
    if not out.any():
        return None
    k = int(np.argmax(out))
    if k == 0:
        return 0.0
    edge = lo if g[k] < lo else hi
    f = lambda tt: float(curve.gamma(tt)) - edge
    if f(ts[k - 1]) * f(ts[k]) > 0:
        return float(ts[k - 1])
    return float(brentq(f, ts[k - 1], ts[k], xtol=1e-14))


def refresh_geometry(problem, curve, strict=True):
    """Single Rankine-Hugoniot sheet along the estimated curve, levels (0, 1).

    With ``strict`` a curve leaving the domain before ``T`` raises
    :class:`DivergedInferenceError`; otherwise the sheet is kept and simply
    sampled only while inside.
    """
    if problem.spatial_dim != 1:
        raise UsageError("shock inference supports one spatial dimension")
    if strict:
        t_exit = exit_time(problem, curve)
        if t_exit is not None:
            raise DivergedInferenceError(
                f"estimated shock leaves the domain at t = {t_exit:.6g}", exit_time=t_exit
            )
    sheet = ShockSheet("shock", (0.0, curve.T), curve.gamma, curve.speed, (1.0,), 0, 1, RankineHugoniot())
    return ShockGeometry((sheet,))


def grid_shock_points(problem, curve):
    """Shock points ``(gamma(t_i), t_i)`` at the in-domain grid nodes.

    Returns ``(points, node_index)``; ``node_index`` maps rows to grid nodes.
    """
    lo, hi = problem.bounds[0]
    g, t = curve.gamma_nodes, curve.nodes
    idx = np.flatnonzero((g > lo) & (g < hi))
    n = idx.size
    X = np.column_stack([g[idx], t[idx]])
    return ShockPoints(
        minus=np.column_stack([X, np.zeros(n)]),
        plus=np.column_stack([X, np.ones(n)]),
        speed=curve.speed_nodes[idx].copy(),
        normal=np.ones((n, 1)),
        kind=np.full(n, KIND_RH, dtype=np.int8),
        jump=np.zeros(n),
        sheet=np.zeros(n, dtype=np.int32),
    ), idx


@dataclass(frozen=True)
class TrainableSlice:
    """Where the speeds sit in the extended vector ``theta ++ s``."""

    start: int
    stop: int

    @property
    def length(self):
        return self.stop - self.start


def speeds_as_trainables(grid, n_params=0):
    """Slice of the speeds appended after ``n_params`` network parameters."""
    return TrainableSlice(n_params, n_params + grid.n_trainable)


def extended_decay_mask(weight_mask, grid):
    """Network weight mask followed by an undecayed block for the speeds."""
    return np.concatenate([np.asarray(weight_mask, dtype=bool), np.zeros(grid.n_trainable, dtype=bool)])
