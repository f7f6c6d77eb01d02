"""Training loops for known and inferred shock geometry, plus evaluation."""

import contextlib
import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
from threadpoolctl import threadpool_limits

from . import network as nw
from . import optim
from .exceptions import ConfigurationError, TrainingError, UndefinedMetricError, UsageError
from .lifting import build_geometry, phi, phi_batch
from .losses import LossWeights, assemble
from .problems import check_in_domain, get_problem
from .sampling import minibatch, relift, sample_batch, sample_shock
from .shock_infer import SpeedGrid, extended_decay_mask, grid_shock_points, integrate_curve, \
    refresh_geometry
from .tape import value_and_grad

log = logging.getLogger(__name__)

DIVERGENCE_LOSS = 1e6
DIVERGENCE_PATIENCE = 100
EVAL_CHUNK = 1 << 16


@dataclass
class TrainConfig:
    """Run configuration; :meth:`for_problem` fills the per-problem defaults."""

    problem: str
    depth: int
    width: int
    beta_s: float
    beta_b: float
    beta_i: float
    n_intrr: int
    n_shock: int
    n_bndry: int
    n_initl: int
    w_int: float = 1.0
    epochs: int = 20000
    lr: float = 0.01
    milestones: tuple = None
    lr_gamma: float = 0.1
    weight_decay: float = 1e-2
    fraction: float = 1.0
    resample: bool = False
    seed: int = 0
    test_nx: int = 1000
    test_nt: int = 1000
    strict_determinism: bool = False
    s_init: float = None
    h: float = None
    hypothesis: float = None
    x0: float = None
    strict_refresh: bool = False
    log_every: int = 0

    def __post_init__(self):
        if int(self.epochs) != self.epochs or self.epochs < 0:
            raise ConfigurationError(f"epochs must be a non-negative integer, got {self.epochs}")
        if not 0.0 < self.fraction <= 1.0:
            raise ConfigurationError(f"fraction must lie in (0, 1], got {self.fraction}")
        for name in ("n_intrr", "n_shock", "n_bndry", "n_initl", "test_nx", "test_nt"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if self.milestones is not None:
            self.milestones = tuple(int(m) for m in self.milestones)

    @classmethod
    def for_problem(cls, name, **overrides):
        p = get_problem(name)
        d = p.defaults
        base = dict(problem=name, depth=d.depth, width=d.width, beta_s=d.beta_s, beta_b=d.beta_b,
                    beta_i=d.beta_i, n_intrr=d.n_intrr, n_shock=d.n_shock, n_bndry=d.n_bndry,
                    n_initl=d.n_initl, w_int=d.w_int, epochs=d.epochs, test_nx=d.test_nx,
                    test_nt=d.test_nt)
        if p.inverse is not None:
            base.update(s_init=p.inverse.s_init, h=p.inverse.h, hypothesis=p.inverse.hypothesis,
                        x0=p.inverse.x0)
        unknown = set(overrides) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        base.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**base)

    @property
    def sizes(self):
        return self.n_intrr, self.n_shock, self.n_bndry, self.n_initl

    @property
    def weights(self):
        return LossWeights(self.beta_s, self.beta_b, self.beta_i, self.w_int)

    def schedule(self):
        return optim.default_milestones(self.epochs) if self.milestones is None else self.milestones

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainResult:
    config: TrainConfig
    network: nw.Network
    best_loss: float
    best_epoch: int
    history: np.ndarray = field(repr=False)
    relative_l2: float = None
    final_relative_l2: float = None
    geometry: object = field(default=None, repr=False)
    speeds: object = None
    speed_history: np.ndarray = field(default=None, repr=False)
    curve: object = field(default=None, repr=False)
    opt_state: optim.OptimState = field(default=None, repr=False)
    wall_clock_s: float = 0.0

    HISTORY_COLUMNS = ("epoch", "L_Intrr", "L_Shock", "L_Bndry", "L_Initl", "total", "lr")

    @property
    def final_s_hat(self):
        if self.speeds is None:
            return None
        return float(self.speeds[0]) if self.speeds.size == 1 else float(self.speeds[-1])


def _seeds(seed):
    init_ss, data_ss = np.random.SeedSequence(int(seed)).spawn(2)
    return int(init_ss.generate_state(1)[0]), int(data_ss.generate_state(1)[0])


def _determinism(config):
    if config.strict_determinism:
        return threadpool_limits(limits=1)
    return contextlib.nullcontext()


class _Tracker:
    """Loss history, best-loss checkpoint and divergence watch."""

    def __init__(self):
        self.rows = []
        self.best = np.inf
        self.best_epoch = -1
        self.best_payload = None
        self.streak = 0

    def record(self, epoch, report, lr, payload):
        total = report.total
        shock = report.L_Shock if report.L_Shock_inv is None else report.L_Shock_inv
        self.rows.append((epoch, report.L_Intrr, shock, report.L_Bndry, report.L_Initl, total, lr))
        if not np.isfinite(total):
            raise TrainingError("non-finite total loss", epoch=epoch, term="total")
        if total < self.best:
            self.best, self.best_epoch = total, epoch
            self.best_payload = payload()
        self.streak = self.streak + 1 if total > DIVERGENCE_LOSS else 0
        if self.streak >= DIVERGENCE_PATIENCE:
            raise TrainingError(f"loss above {DIVERGENCE_LOSS:g} for {DIVERGENCE_PATIENCE} epochs",
                                epoch=epoch, term="total")

    def history(self):
        return np.array(self.rows, dtype=np.float64).reshape(-1, 7)


def _log(config, epoch, report, lr):
    if config.log_every and epoch % config.log_every == 0:
        log.info("epoch %d total %.4e int %.3e shock %.3e bnd %.3e init %.3e lr %.1e", epoch,
                 report.total, report.L_Intrr, report.L_Shock, report.L_Bndry, report.L_Initl, lr)


def train_forward(config):
    """Train on a problem whose shock geometry is known."""
    problem = get_problem(config.problem)
    if problem.is_inverse:
        raise UsageError(f"{problem.name} has unknown geometry; use train_inverse")
    start = time.perf_counter()
    with _determinism(config):
        geometry = build_geometry(problem)
        init_seed, data_seed = _seeds(config.seed)
        batch = sample_batch(problem, geometry, config.sizes, data_seed)
        net = nw.init_network(config.depth, config.width, problem.input_dim, init_seed)
        state = optim.OptimState(net.n_params, lr=config.lr, milestones=config.schedule(),
                                 gamma=config.lr_gamma, weight_decay=config.weight_decay,
                                 decay_mask=net.weight_mask())
        weights = config.weights
        tracker = _Tracker()

        for epoch in range(config.epochs + 1):
            if config.resample and epoch:
                batch = sample_batch(problem, geometry, config.sizes, [data_seed, epoch])
            mb = minibatch(batch, config.fraction, data_seed, epoch)
            holder = {}

            def objective(tr):
                total, holder["report"] = assemble(tr, problem, mb, weights)
                return total

            try:
                _, grad, _ = value_and_grad(objective, net)
            except TrainingError as err:
                raise TrainingError(str(err), epoch=epoch) from err
            lr = optim.lr_at(state, epoch)
            tracker.record(epoch, holder["report"], lr, lambda: net.params.copy())
            _log(config, epoch, holder["report"], lr)
            # the last pass only scores the final parameters
            if epoch == config.epochs:
                break
            try:
                net = net.with_params(optim.step(state, net.params, grad, lr=lr))
            except TrainingError as err:
                raise TrainingError(str(err), epoch=epoch) from err

        best = net.with_params(tracker.best_payload)
        rel = relative_l2(best, geometry, problem, config.test_nx, config.test_nt)
        final = rel if tracker.best_epoch == config.epochs else \
            relative_l2(net, geometry, problem, config.test_nx, config.test_nt)
    return TrainResult(config, best, tracker.best, tracker.best_epoch, tracker.history(), rel, final,
                       geometry, opt_state=state, wall_clock_s=time.perf_counter() - start)


def speed_grid_for(config, problem):
    setup = problem.inverse
    grid = SpeedGrid.from_setup(problem, config.s_init)
    h = setup.h if config.h is None else config.h
    x0 = setup.x0 if config.x0 is None else config.x0
    hyp = config.hypothesis if config.hypothesis is not None else setup.hypothesis
    n = int(round(problem.T / h)) + 1
    count = 1 if setup.mode == "constant" else n
    s0 = setup.s_init if config.s_init is None else config.s_init
    return replace(grid, h=h, x0=x0, hypothesis=hyp, values=np.full(count, float(s0)))


def train_inverse(config):
    """Train with the shock speeds as extra parameters, re-integrating the curve each epoch."""
    problem = get_problem(config.problem)
    if not problem.is_inverse:
        raise UsageError(f"{problem.name} has known geometry; use train_forward")
    start = time.perf_counter()
    with _determinism(config):
        grid = speed_grid_for(config, problem)
        init_seed, data_seed = _seeds(config.seed)
        curve = integrate_curve(grid)
        try:
            geometry = refresh_geometry(problem, curve, strict=config.strict_refresh)
        except TrainingError as err:
            err.epoch = 0
            raise
        base = sample_batch(problem, geometry, config.sizes, data_seed)
        shock_rng = np.random.default_rng([data_seed, 1])
        net = nw.init_network(config.depth, config.width, problem.input_dim, init_seed)
        n_theta = net.n_params
        state = optim.OptimState(n_theta + grid.n_trainable, lr=config.lr, milestones=config.schedule(),
                                 gamma=config.lr_gamma, weight_decay=config.weight_decay,
                                 decay_mask=extended_decay_mask(net.weight_mask(), grid))
        weights = config.weights
        tracker = _Tracker()
        speed_rows = []

        for epoch in range(config.epochs + 1):
            curve = integrate_curve(grid)
            try:
                geometry = refresh_geometry(problem, curve, strict=config.strict_refresh)
            except TrainingError as err:
                err.epoch = epoch
                raise
            batch = relift(base, geometry)
            batch = replace(batch, shock=sample_shock(problem, geometry, config.n_shock, shock_rng))
            mb = minibatch(batch, config.fraction, data_seed, epoch)
            gpts, idx = grid_shock_points(problem, curve)
            holder = {}

            def objective(tr, s):
                speeds = s if grid.mode == "constant" else s[idx]
                total, holder["report"] = assemble(tr, problem, mb, weights, speeds, gpts)
                return total

            try:
                _, g_theta, (g_s,) = value_and_grad(objective, net, grid.values)
            except TrainingError as err:
                raise TrainingError(str(err), epoch=epoch) from err
            lr = optim.lr_at(state, epoch)
            speed_rows.append(grid.values.copy())
            snapshot = lambda: (net.params.copy(), grid.values.copy())
            tracker.record(epoch, holder["report"], lr, snapshot)
            _log(config, epoch, holder["report"], lr)
            if epoch == config.epochs:
                break
            joint = np.concatenate([net.params, grid.values])
            try:
                joint = optim.step(state, joint, np.concatenate([g_theta, g_s]), lr=lr)
            except TrainingError as err:
                raise TrainingError(str(err), epoch=epoch) from err
            net = net.with_params(joint[:n_theta])
            grid = grid.with_values(joint[n_theta:])

        best_params, best_speeds = tracker.best_payload
        best = net.with_params(best_params)
        best_grid = grid.with_values(best_speeds)
        best_curve = integrate_curve(best_grid)
        best_geometry = refresh_geometry(problem, best_curve, strict=False)
        rel = relative_l2(best, best_geometry, problem, config.test_nx, config.test_nt)
    return TrainResult(config, best, tracker.best, tracker.best_epoch, tracker.history(), rel, rel,
                       best_geometry, speeds=best_speeds, speed_history=np.array(speed_rows),
                       curve=best_curve, opt_state=state, wall_clock_s=time.perf_counter() - start)


def train(config):
    problem = get_problem(config.problem)
    return train_inverse(config) if problem.is_inverse else train_forward(config)


def project(net, geometry, x, t, problem=None):
    """Physical solution ``u(x, t) = net(x, t, phi(x, t))`` at one point."""
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if problem is not None:
        check_in_domain(problem, xs[None, :], np.float64(t))
    p = phi(geometry, xs if xs.size > 1 else float(xs[0]), float(t))
    return nw.forward(net, np.concatenate([xs, [t, p]]))


def project_batch(net, geometry, X, t, problem=None):
    """Vectorized :func:`project`; ``X`` is ``(n, d)`` and ``t`` is ``(n,)``."""
    X = np.asarray(X, dtype=np.float64).reshape(len(t), -1)
    t = np.asarray(t, dtype=np.float64)
    if problem is not None:
        check_in_domain(problem, X, t)
    out = np.empty(X.shape[0])
    for s in range(0, X.shape[0], EVAL_CHUNK):
        Xs, ts = X[s:s + EVAL_CHUNK], t[s:s + EVAL_CHUNK]
        out[s:s + EVAL_CHUNK] = nw.evaluate(net, np.column_stack([Xs, ts, phi_batch(geometry, Xs, ts)]))
    return out


def test_grid(problem, nx, nt):
    """Uniform grid: ``nx`` nodes per spatial axis (endpoints included), ``nt`` times on [0, T]."""
    axes = [np.linspace(lo, hi, nx) for lo, hi in problem.bounds]
    axes.append(np.linspace(0.0, problem.T, nt))
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([m.ravel() for m in mesh])
    return pts[:, :-1], pts[:, -1]


def _grid_blocks(problem, nx, nt):
    # one time slice at a time keeps memory flat for the 2-d grid
    axes = [np.linspace(lo, hi, nx) for lo, hi in problem.bounds]
    mesh = np.meshgrid(*axes, indexing="ij")
    X = np.column_stack([m.ravel() for m in mesh])
    for tk in np.linspace(0.0, problem.T, nt):
        yield X, np.full(X.shape[0], tk)


def relative_l2(net, geometry, problem, nx=None, nt=None, predict=None):
    """``||u - u_hat|| / ||u||`` over the uniform test grid."""
    problem = get_problem(problem) if isinstance(problem, str) else problem
    nx = problem.defaults.test_nx if nx is None else nx
    nt = problem.defaults.test_nt if nt is None else nt
    num = den = 0.0
    for X, t in _grid_blocks(problem, nx, nt):
        u = problem.exact_solution(X, t)
        pred = project_batch(net, geometry, X, t) if predict is None else predict(X, t)
        num += float(np.sum((u - pred) ** 2))
        den += float(np.sum(u * u))
    if den == 0.0:
        raise UndefinedMetricError(f"exact solution of {problem.name} vanishes on the test grid")
    return float(np.sqrt(num / den))
