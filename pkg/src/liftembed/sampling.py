"""Collocation datasets for the lifted losses.

Every point set stores network-ready rows ``(x_1, ..., x_d, t, phi)``.
Shock points carry two rows (one per side level) plus the speed, normal and
jump constraint of their sheet.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import UsageError
from .lifting import ON_SHEET_TOL, PrescribedJump, phi_batch, sampling_window

# shock samples closer than this to a sheet-intersection instant are redrawn
DEGENERATE_GAP = 1e-9

KIND_RH = 0
KIND_JUMP = 1


@dataclass(frozen=True)
class ShockPoints:
    minus: np.ndarray
    plus: np.ndarray
    speed: np.ndarray
    normal: np.ndarray
    kind: np.ndarray
    jump: np.ndarray
    sheet: np.ndarray

    def __len__(self):
        return self.minus.shape[0]

    def take(self, idx):
        return ShockPoints(*(getattr(self, f)[idx] for f in self.__dataclass_fields__))


@dataclass(frozen=True)
class BoundaryPoints:
    """Dirichlet rows with data ``g``, or periodic pairs ``(X, X_pair)`` with ``g`` None."""

    X: np.ndarray
    g: np.ndarray = None
    X_pair: np.ndarray = None

    @property
    def periodic(self):
        return self.X_pair is not None

    def __len__(self):
        return self.X.shape[0]

    def take(self, idx):
        return BoundaryPoints(self.X[idx], None if self.g is None else self.g[idx],
                              None if self.X_pair is None else self.X_pair[idx])


@dataclass(frozen=True)
class CollocationBatch:
    interior: np.ndarray
    shock: ShockPoints
    boundary: BoundaryPoints
    initial: np.ndarray
    u0: np.ndarray
    sheet_ids: tuple = field(default=())

    @property
    def sizes(self):
        return (self.interior.shape[0], len(self.shock), len(self.boundary), self.initial.shape[0])


def _check_sizes(sizes):
    sizes = tuple(int(n) for n in sizes)
    if len(sizes) != 4 or any(n <= 0 for n in sizes):
        raise UsageError(f"batch sizes must be four positive integers, got {sizes}")
    return sizes


def _rows(X, t, ph):
    return np.column_stack([X, t, ph])


def _uniform_box(rng, bounds, n):
    return np.column_stack([rng.uniform(lo, hi, n) for lo, hi in bounds]) if n else np.zeros((0, len(bounds)))


def _off_sheet(geometry, X, t):
    ok = np.ones(X.shape[0], dtype=bool)
    for sheet in geometry.sheets:
        near = sheet.active(t) & (np.abs(sheet.signed_distance(X, t)) <= ON_SHEET_TOL)
        ok &= ~near
    return ok


def _split(n, weights):
    """Largest-remainder split of ``n`` proportional to ``weights``."""
    w = np.asarray(weights, dtype=np.float64)
    if w.sum() <= 0:
        w = np.ones_like(w)
    raw = n * w / w.sum()
    counts = np.floor(raw).astype(int)
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[:n - counts.sum()]] += 1
    return counts


def sample_interior(problem, geometry, n, rng):
    d = problem.spatial_dim
    X = np.zeros((0, d))
    t = np.zeros(0)
    while X.shape[0] < n:
        k = n - X.shape[0]
        Xk = _uniform_box(rng, problem.bounds, k)
        # 1 - U(0, 1) lies in (0, 1], so times cover (0, T]
        tk = problem.T * (1.0 - rng.uniform(0.0, 1.0, k))
        keep = _off_sheet(geometry, Xk, tk)
        X = np.vstack([X, Xk[keep]])
        t = np.concatenate([t, tk[keep]])
    return _rows(X, t, phi_batch(geometry, X, t))


def sample_shock(problem, geometry, n, rng):
    d = problem.spatial_dim
    windows = [sampling_window(s, problem) for s in geometry.sheets]
    live = [i for i, w in enumerate(windows) if w is not None]
    if not live:
        raise UsageError(f"{problem.name}: no sheet enters the domain")
    counts = _split(n, [windows[i][1] - windows[i][0] for i in live])
    parts = []
    for i, count in zip(live, counts):
        sheet = geometry.sheets[i]
        t_lo, t_hi = windows[i]
        t = np.zeros(0)
        while t.size < count:
            tk = rng.uniform(t_lo, t_hi, count - t.size)
            ok = sheet.active(tk)
            for td in sheet.degenerate_times:
                ok &= np.abs(tk - td) >= DEGENERATE_GAP
            t = np.concatenate([t, tk[ok]])
        normal = np.asarray(sheet.normal, dtype=np.float64)
        axis = int(np.argmax(np.abs(normal)))
        if np.count_nonzero(normal) != 1:
            raise UsageError(f"sheet {sheet.id}: only axis-aligned normals are sampled")
        X = _uniform_box(rng, problem.bounds, count)
        X[:, axis] = sheet.gamma(t) / normal[axis]
        jump = sheet.constraint.jump if isinstance(sheet.constraint, PrescribedJump) else 0.0
        kind = KIND_JUMP if isinstance(sheet.constraint, PrescribedJump) else KIND_RH
        parts.append(ShockPoints(
            minus=_rows(X, t, np.full(count, float(sheet.phi_minus))),
            plus=_rows(X, t, np.full(count, float(sheet.phi_plus))),
            speed=np.asarray(sheet.speed(t), dtype=np.float64) * np.ones(count),
            normal=np.tile(normal, (count, 1)),
            kind=np.full(count, kind, dtype=np.int8),
            jump=np.full(count, float(jump)),
            sheet=np.full(count, i, dtype=np.int32),
        ))
    return ShockPoints(*(np.concatenate([getattr(p, f) for p in parts])
                         for f in ShockPoints.__dataclass_fields__))


def sample_boundary(problem, geometry, n, rng):
    d = problem.spatial_dim
    if problem.boundary.kind == "periodic":
        axis = problem.boundary.axis
        lo, hi = problem.bounds[axis]
        t = rng.uniform(0.0, problem.T, n)
        X = _uniform_box(rng, problem.bounds, n)
        X[:, axis] = lo
        Xp = X.copy()
        Xp[:, axis] = hi
        return BoundaryPoints(_rows(X, t, phi_batch(geometry, X, t)), None,
                              _rows(Xp, t, phi_batch(geometry, Xp, t)))
    faces = problem.faces()
    counts = _split(n, np.ones(len(faces)))
    Xs, ts = [], []
    for (axis, side), count in zip(faces, counts):
        X = _uniform_box(rng, problem.bounds, count)
        X[:, axis] = problem.bounds[axis][side]
        Xs.append(X)
        ts.append(rng.uniform(0.0, problem.T, count))
    X = np.vstack(Xs).reshape(-1, d)
    t = np.concatenate(ts)
    return BoundaryPoints(_rows(X, t, phi_batch(geometry, X, t)), problem.boundary_data(X, t))


def sample_initial(problem, geometry, n, rng):
    X = _uniform_box(rng, problem.bounds, n)
    t = np.zeros(n)
    return _rows(X, t, phi_batch(geometry, X, t)), problem.initial(X)


def sample_batch(problem, geometry, sizes, seed):
    """Draw the four collocation sets; deterministic in ``seed``."""
    n_in, n_sh, n_bd, n_ini = _check_sizes(sizes)
    if geometry.spatial_dim != problem.spatial_dim:
        raise UsageError(
            f"geometry is {geometry.spatial_dim}-d but {problem.name} is {problem.spatial_dim}-d"
        )
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4)]
    interior = sample_interior(problem, geometry, n_in, rngs[0])
    shock = sample_shock(problem, geometry, n_sh, rngs[1])
    boundary = sample_boundary(problem, geometry, n_bd, rngs[2])
    initial, u0 = sample_initial(problem, geometry, n_ini, rngs[3])
    return CollocationBatch(interior, shock, boundary, initial, u0,
                            tuple(s.id for s in geometry.sheets))


def relift(batch, geometry):
    """Recompute the phi column of the non-shock sets under a new geometry."""
    d = batch.interior.shape[1] - 2

    def lift(rows):
        out = rows.copy()
        out[:, -1] = phi_batch(geometry, rows[:, :d], rows[:, d])
        return out

    bd = batch.boundary
    boundary = BoundaryPoints(lift(bd.X), bd.g, None if bd.X_pair is None else lift(bd.X_pair))
    return replace(batch, interior=lift(batch.interior), boundary=boundary, initial=lift(batch.initial))


def _subsample(rng, n, fraction):
    k = max(1, int(round(fraction * n))) if n else 0
    return np.sort(rng.choice(n, size=k, replace=False))


def minibatch(batch, fraction, seed, epoch):
    """Uniform subsample without replacement of each set; fraction 1 returns ``batch``."""
    if not 0.0 < fraction <= 1.0:
        raise UsageError(f"mini-batch fraction must lie in (0, 1], got {fraction}")
    if fraction == 1.0:
        return batch
    rng = np.random.default_rng([int(seed), int(epoch)])
    i_in = _subsample(rng, batch.interior.shape[0], fraction)
    i_sh = _subsample(rng, len(batch.shock), fraction)
    i_bd = _subsample(rng, len(batch.boundary), fraction)
    i_ini = _subsample(rng, batch.initial.shape[0], fraction)
    return CollocationBatch(batch.interior[i_in], batch.shock.take(i_sh), batch.boundary.take(i_bd),
                            batch.initial[i_ini], batch.u0[i_ini], batch.sheet_ids)
