"""Discontinuity sheets and the augmented variable phi.

A sheet is the moving surface ``x . nu = gamma(t)`` active for ``t`` in its
time range. In the ``heaviside_sum`` variant phi counts, with multiplicity
``phi_plus - phi_minus``, the sheets lying at or below a point along their
normal; ``H(0) = 1``, so a point on a sheet takes the upper level. The
``transported_initial_data`` variant instead sums shifted copies of a
piecewise-constant initial profile.
"""

from dataclasses import dataclass, field
from math import pi

import numpy as np
from scipy.optimize import brentq

from .exceptions import DegeneratePointError, UsageError
from .problems import _square_wave, get_problem, merge_point, merging_curves, rarefaction_curve, \
    rarefaction_speed, wrap_count

ON_SHEET_TOL = 1e-12


@dataclass(frozen=True)
class RankineHugoniot:
    """Residual ``s [u] - sum_j nu_j [f_j(u)]``."""

    kind: str = "rh"


@dataclass(frozen=True)
class PrescribedJump:
    """Residual ``[u] - jump``."""

    jump: float
    kind: str = "jump"


@dataclass(frozen=True)
class ShockSheet:
    id: str
    t_range: tuple
    gamma: object = field(repr=False)
    speed: object = field(repr=False)
    normal: tuple
    phi_minus: float
    phi_plus: float
    constraint: object
    open_start: bool = False
    degenerate_times: tuple = ()

    def __post_init__(self):
        t_a, t_b = self.t_range
        if not t_a < t_b:
            raise UsageError(f"sheet {self.id}: empty time range {self.t_range}")
        if self.phi_plus == self.phi_minus:
            raise UsageError(f"sheet {self.id}: side levels must differ")
        if abs(np.linalg.norm(self.normal) - 1.0) > 1e-12:
            raise UsageError(f"sheet {self.id}: normal {self.normal} is not unit length")

    @property
    def increment(self):
        return self.phi_plus - self.phi_minus

    def active(self, t):
        t = np.asarray(t, dtype=np.float64)
        t_a, t_b = self.t_range
        lower = t > t_a if self.open_start else t >= t_a
        return lower & (t <= t_b)

    def signed_distance(self, X, t):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return X @ np.asarray(self.normal, dtype=np.float64) - self.gamma(np.asarray(t, dtype=np.float64))


@dataclass(frozen=True)
class ShockGeometry:
    sheets: tuple
    variant: str = "heaviside_sum"
    profile: object = field(default=None, repr=False)
    wrap: int = 0
    transport_speed: float = 0.0
    period: float = 2 * pi
    spatial_dim: int = 1

    def sheet(self, sheet_id):
        for s in self.sheets:
            if s.id == sheet_id:
                return s
        raise UsageError(f"no sheet named {sheet_id!r}")


def phi(geometry, x, t):
    """Augmented variable at ``(x, t)``; scalar in, float out.

    ``x`` follows :func:`liftembed.problems.exact`: a scalar or length-d vector
    for one point, or an ``(n, d)`` / ``(n,)`` batch.
    """
    d = geometry.spatial_dim
    scalar = np.ndim(t) == 0 and np.size(x) == d
    X = np.asarray(x, dtype=np.float64).reshape(-1, d)
    tt = np.broadcast_to(np.asarray(t, dtype=np.float64), (X.shape[0],))
    out = phi_batch(geometry, X, tt)
    return float(out[0]) if scalar else out


def phi_batch(geometry, X, t):
    X = np.asarray(X, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if geometry.variant == "transported_initial_data":
        shifted = X[:, 0] - geometry.transport_speed * t
        return sum(geometry.profile(shifted - k * geometry.period) for k in range(geometry.wrap + 1))
    out = np.zeros(X.shape[0])
    for sheet in geometry.sheets:
        on = sheet.active(t) & (sheet.signed_distance(X, t) >= 0.0)
        out += sheet.increment * on
    return out


def phi_limits(sheet, point, tol=ON_SHEET_TOL):
    """``(phi_minus, phi_plus, s, nu, constraint)`` at a point on ``sheet``.

    ``point`` is ``(x_1, ..., x_d, t)``.
    """
    p = np.asarray(point, dtype=np.float64)
    X, t = p[:-1][None, :], float(p[-1])
    if any(t == td for td in sheet.degenerate_times):
        raise DegeneratePointError(f"sheet {sheet.id}: t = {t} is a sheet-intersection instant")
    if not bool(sheet.active(t)):
        raise UsageError(f"sheet {sheet.id}: t = {t} outside validity {sheet.t_range}")
    dist = float(sheet.signed_distance(X, t)[0])
    if abs(dist) > tol:
        raise UsageError(f"sheet {sheet.id}: point is {dist:.3e} off the sheet")
    return sheet.phi_minus, sheet.phi_plus, float(sheet.speed(t)), tuple(sheet.normal), sheet.constraint


def _linear(c0, c1):
    return (lambda t: c0 + c1 * np.asarray(t, dtype=np.float64),
            lambda t: c1 + 0.0 * np.asarray(t, dtype=np.float64))


def _convection_sheets(problem, variant):
    (coeff,) = problem.flux_prime(0.0)
    s = float(coeff)
    T = problem.T
    x1 = problem.initial_jumps[0][0]
    entries = []
    for i, (x_i, jump) in enumerate(problem.initial_jumps, start=1):
        n_i = wrap_count(s, T, x_i if variant == "heaviside_sum" else x1)
        for k in range(n_i + 1):
            entries.append((x_i + 2 * k * pi, i, k, jump))
    entries.sort()
    sheets = []
    for rank, (offset, i, k, jump) in enumerate(entries):
        gamma, speed = _linear(offset, s)
        if variant == "heaviside_sum":
            lo, hi = rank, rank + 1
        else:
            lo, hi = (0, 1) if jump > 0 else (1, 0)
        sheets.append(ShockSheet(
            id=f"x{i}_k{k}", t_range=(0.0, T), gamma=gamma, speed=speed, normal=(1.0,),
            phi_minus=lo, phi_plus=hi, constraint=PrescribedJump(jump),
        ))
    return tuple(sheets), s


def build_geometry(problem):
    """Sheets and phi construction for a forward problem with known shocks."""
    if isinstance(problem, str):
        problem = get_problem(problem)
    name = problem.name
    if problem.is_inverse:
        raise UsageError(f"{name} has unknown shock geometry; use shock_infer instead")
    rh = RankineHugoniot()

    if name in ("convection_unit", "convection_fast"):
        sheets, _ = _convection_sheets(problem, "heaviside_sum")
        return ShockGeometry(sheets)

    if name == "convection_alt_phi":
        sheets, s = _convection_sheets(problem, "transported")
        n = wrap_count(s, problem.T, problem.initial_jumps[0][0])
        return ShockGeometry(sheets, variant="transported_initial_data", profile=_square_wave,
                             wrap=n, transport_speed=s)

    if name == "burgers_shock":
        gamma, speed = _linear(0.0, 1.0)
        return ShockGeometry((ShockSheet("shock", (0.0, problem.T), gamma, speed, (1.0,), 0, 1, rh),))

    if name == "burgers_merging":
        (g1, s1), (g2, s2), (g3, s3) = merging_curves()
        _, t_star = merge_point()
        return ShockGeometry((
            ShockSheet("gamma1", (0.0, t_star), g1, s1, (1.0,), 0, 1, rh, degenerate_times=(t_star,)),
            ShockSheet("gamma2", (0.0, t_star), g2, s2, (1.0,), 1, 2, rh, degenerate_times=(t_star,)),
            ShockSheet("gamma3", (t_star, problem.T), g3, s3, (1.0,), 0, 2, rh, open_start=True,
                       degenerate_times=(t_star,)),
        ))

    if name == "burgers_rarefaction":
        return ShockGeometry((
            ShockSheet("shock", (0.0, problem.T), rarefaction_curve, rarefaction_speed, (1.0,), 0, 1, rh),
        ))

    if name == "burgers_2d":
        g1, v1 = _linear(1.0, 3.0)
        g2, v2 = _linear(2.0, 0.5)
        return ShockGeometry((
            ShockSheet("plane1", (0.0, problem.T), g1, v1, (1.0, 0.0), 0, 1, rh),
            ShockSheet("plane2", (0.0, problem.T), g2, v2, (1.0, 0.0), 1, 2, rh),
        ), spatial_dim=2)

    raise UsageError(f"no geometry construction registered for {name}")


def sampling_window(sheet, problem, samples=4001):
    """Sub-interval of the sheet's time range during which it lies inside the domain.

    Returns ``(t_lo, t_hi)`` or None. Assumes the in-domain set is one interval,
    which holds for every registered sheet.
    """
    axis = int(np.argmax(np.abs(sheet.normal)))
    lo, hi = problem.bounds[axis]
    t_a, t_b = sheet.t_range
    ts = np.linspace(t_a, t_b, samples)
    g = sheet.gamma(ts)
    inside = (g > lo) & (g < hi)
    if not inside.any():
        return None
    idx = np.flatnonzero(inside)
    i0, i1 = idx[0], idx[-1]

    def edge(ta, tb):
        # ta is inside, tb is on or beyond the bound that was crossed
        bound = lo if sheet.gamma(tb) <= lo else hi
        f = lambda t: float(sheet.gamma(t)) - bound
        if f(tb) == 0.0:
            return tb
        return brentq(f, ta, tb, xtol=1e-15)

    t_lo = t_a if i0 == 0 else edge(ts[i0 - 1], ts[i0])
    t_hi = t_b if i1 == samples - 1 else edge(ts[i1], ts[i1 + 1])
    return float(t_lo), float(t_hi)


def single_sheet_geometry(gamma, speed, T, x0=None):
    """One Rankine-Hugoniot sheet with levels (0, 1), used by shock inference."""
    return ShockGeometry((ShockSheet("shock", (0.0, T), gamma, speed, (1.0,), 0, 1, RankineHugoniot()),))
