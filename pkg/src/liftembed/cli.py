"""Command-line front end.

Commands: ``train``, ``eval``, ``export``, ``export-geometry``,
``export-batch`` and ``list-problems``. Run configuration is a sectioned
key=value file; command-line flags override file values.
"""

import argparse
import configparser
import csv
import logging
import os
import sys
from dataclasses import dataclass, fields

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .exceptions import CheckpointError, ConfigurationError, LiftEmbedError, TrainingError, UsageError
from .lifting import build_geometry
from .problems import get_problem, problem_names
from .sampling import sample_batch
from .shock_infer import SpeedGrid, integrate_curve, refresh_geometry
from .trainer import TrainConfig, TrainResult, _seeds, project_batch, relative_l2, speed_grid_for, train

log = logging.getLogger("liftembed")

EXIT_USAGE = 2
EXIT_TRAINING = 3
EXIT_CHECKPOINT = 4

# section -> TrainConfig fields stored there
SECTIONS = {
    "run": ("problem", "seed", "strict_determinism", "log_every"),
    "network": ("depth", "width"),
    "loss": ("beta_s", "beta_b", "beta_i", "w_int"),
    "sampling": ("n_intrr", "n_shock", "n_bndry", "n_initl", "fraction", "resample"),
    "optim": ("epochs", "lr", "milestones", "lr_gamma", "weight_decay"),
    "inverse": ("s_init", "h", "hypothesis", "x0", "strict_refresh"),
    "eval": ("test_nx", "test_nt"),
}
OUTPUT_KEYS = ("out", "export_nx", "export_nt")

CONFIG_FILE = "config.ini"
CHECKPOINT_FILE = "checkpoint.bin"
HISTORY_FILE = "loss_history.csv"
METRICS_FILE = "metrics.txt"
SOLUTION_FILE = "solution.csv"
CURVE_FILE = "curve.csv"


@dataclass
class RunConfig:
    train: TrainConfig
    out: str = "runs/latest"
    export_nx: int = 101
    export_nt: int = 101


_FIELD_TYPES = {f.name: f.type for f in fields(TrainConfig)}


def _parse_value(key, text):
    text = text.strip()
    if text.lower() in ("none", ""):
        return None
    kind = _FIELD_TYPES.get(key)
    if key == "milestones":
        return tuple(int(v) for v in text.replace(",", " ").split())
    if kind is bool or key in ("strict_determinism", "resample", "strict_refresh"):
        low = text.lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise ConfigurationError(f"{key}: expected a boolean, got {text!r}")
        return low in ("true", "1", "yes")
    if kind is str or key in ("problem", "out"):
        return text
    if kind is int or key in ("export_nx", "export_nt"):
        try:
            return int(text)
        except ValueError:
            raise ConfigurationError(f"{key}: expected an integer, got {text!r}") from None
    try:
        return float(text)
    except ValueError:
        raise ConfigurationError(f"{key}: expected a number, got {text!r}") from None


def _format_value(v):
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def read_config(path):
    """Flat ``{key: value}`` from a sectioned config file; unknown keys are rejected."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as err:
        raise ConfigurationError(f"cannot read config {path}: {err}") from err
    values = {}
    for section in parser.sections():
        allowed = OUTPUT_KEYS if section == "output" else SECTIONS.get(section)
        if allowed is None:
            raise ConfigurationError(f"unknown config section [{section}]")
        for key, text in parser.items(section):
            if key not in allowed:
                raise ConfigurationError(f"unknown config key {section}.{key}")
            values[key] = _parse_value(key, text)
    return values


def build_run_config(values):
    values = dict(values)
    name = values.pop("problem", None)
    if name is None:
        raise ConfigurationError("no problem given (use --problem or run.problem)")
    out = {k: values.pop(k) for k in OUTPUT_KEYS if values.get(k) is not None}
    for k in OUTPUT_KEYS:
        values.pop(k, None)
    return RunConfig(TrainConfig.for_problem(name, **values), **out)


def write_config(run, path):
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    tc = run.train
    for section, keys in SECTIONS.items():
        parser[section] = {k: _format_value(getattr(tc, k)) for k in keys}
    parser["output"] = {k: _format_value(getattr(run, k)) for k in OUTPUT_KEYS}
    with open(path, "w") as fh:
        parser.write(fh)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(x):
    return repr(float(x))


def write_metrics(path, metrics, append=False):
    with open(path, "a" if append else "w") as fh:
        for k, v in metrics.items():
            fh.write(f"{k}={_fmt(v) if isinstance(v, (float, np.floating)) else v}\n")


def read_metrics(path):
    out = {}
    with open(path) as fh:
        for line in fh:
            if "=" in line:
                k, v = line.strip().split("=", 1)
                out[k] = v
    return out


def _solution_rows(problem, net, geometry, nx, nt, times=None):
    axes = [np.linspace(lo, hi, nx) for lo, hi in problem.bounds]
    ts = np.linspace(0.0, problem.T, nt) if times is None else np.asarray(times, dtype=np.float64)
    mesh = np.meshgrid(*axes, ts, indexing="ij")
    pts = np.column_stack([m.ravel() for m in mesh])
    X, t = pts[:, :-1], pts[:, -1]
    u = problem.exact_solution(X, t)
    pred = project_batch(net, geometry, X, t, problem)
    return np.column_stack([X, t, u, pred, np.abs(u - pred)])


def _solution_header(problem):
    return ["x", "y"][:problem.spatial_dim] + ["t", "u_exact", "u_pred", "abs_err"]


def _curve_rows(curve):
    return np.column_stack([curve.nodes, curve.speed_nodes, curve.gamma_nodes])


def _inverse_metrics(problem, result):
    curve = result.curve
    err = np.abs(curve.gamma_nodes - problem.true_shock(curve.nodes))
    return {"final_s_hat": result.final_s_hat, "max_curve_error": float(err.max())}


def _run_geometry(problem, ckpt):
    if problem.is_inverse:
        if ckpt.speed_grid is None:
            raise CheckpointError("inverse-problem checkpoint has no speed grid")
        curve = integrate_curve(ckpt.speed_grid)
        return refresh_geometry(problem, curve, strict=False), curve
    return build_geometry(problem), None


def _load_run(run_dir):
    cfg = os.path.join(run_dir, CONFIG_FILE)
    ckpt_path = os.path.join(run_dir, CHECKPOINT_FILE)
    if not os.path.isfile(cfg):
        raise CheckpointError(f"{run_dir} has no {CONFIG_FILE}")
    run = build_run_config(read_config(cfg))
    ckpt = load_checkpoint(ckpt_path)
    return run, ckpt


def cmd_train(args):
    values = read_config(args.config) if args.config else {}
    for key, text in args.set or ():
        values[key] = _parse_value(key, text)
    flag_map = {"problem": args.problem, "seed": args.seed, "out": args.out, "epochs": args.epochs,
                "s_init": args.s_init, "log_every": args.log_every, "fraction": args.fraction}
    values.update({k: v for k, v in flag_map.items() if v is not None})
    if args.strict_determinism:
        values["strict_determinism"] = True
    run = build_run_config(values)
    os.makedirs(run.out, exist_ok=True)
    write_config(run, os.path.join(run.out, CONFIG_FILE))

    result = train(run.train)
    problem = get_problem(run.train.problem)
    grid = None
    if problem.is_inverse:
        grid = speed_grid_for(run.train, problem).with_values(result.speeds)
    save_checkpoint(os.path.join(run.out, CHECKPOINT_FILE), result.network, result.opt_state, grid)
    _write_csv(os.path.join(run.out, HISTORY_FILE), TrainResult.HISTORY_COLUMNS,
               [[int(r[0])] + [_fmt(v) for v in r[1:]] for r in result.history])
    metrics = {"relative_l2": result.relative_l2, "best_loss": result.best_loss,
               "best_epoch": result.best_epoch, "final_relative_l2": result.final_relative_l2,
               "wall_clock_s": result.wall_clock_s}
    if problem.is_inverse:
        metrics.update(_inverse_metrics(problem, result))
        _write_csv(os.path.join(run.out, CURVE_FILE), ["t", "s_hat", "gamma_hat"],
                   [[_fmt(v) for v in row] for row in _curve_rows(result.curve)])
    write_metrics(os.path.join(run.out, METRICS_FILE), metrics)
    rows = _solution_rows(problem, result.network, result.geometry, run.export_nx, run.export_nt)
    _write_csv(os.path.join(run.out, SOLUTION_FILE), _solution_header(problem),
               [[_fmt(v) for v in r] for r in rows])
    for k, v in metrics.items():
        print(f"{k}={v}")
    return 0


def cmd_eval(args):
    run, ckpt = _load_run(args.run)
    problem = get_problem(run.train.problem)
    geometry, _ = _run_geometry(problem, ckpt)
    nx = run.train.test_nx if args.nx is None else args.nx
    nt = run.train.test_nt if args.nt is None else args.nt
    rel = relative_l2(ckpt.network, geometry, problem, nx, nt)
    key = "relative_l2_eval" if args.nx is None and args.nt is None else f"relative_l2_eval_{nx}x{nt}"
    write_metrics(os.path.join(args.run, METRICS_FILE), {key: rel}, append=True)
    print(f"relative_l2={rel!r}")
    return 0


def cmd_export(args):
    run, ckpt = _load_run(args.run)
    problem = get_problem(run.train.problem)
    geometry, curve = _run_geometry(problem, ckpt)
    out = args.out or args.run
    os.makedirs(out, exist_ok=True)
    header = _solution_header(problem)
    written = []
    if args.slices:
        for t in args.slices:
            rows = _solution_rows(problem, ckpt.network, geometry, args.nx or run.export_nx, 1, [t])
            path = os.path.join(out, f"slice_t{t:g}.csv")
            _write_csv(path, header, [[_fmt(v) for v in r] for r in rows])
            written.append(path)
    else:
        rows = _solution_rows(problem, ckpt.network, geometry, args.nx or run.export_nx,
                              args.nt or run.export_nt)
        path = os.path.join(out, SOLUTION_FILE)
        _write_csv(path, header, [[_fmt(v) for v in r] for r in rows])
        written.append(path)
    if curve is not None:
        path = os.path.join(out, CURVE_FILE)
        _write_csv(path, ["t", "s_hat", "gamma_hat"], [[_fmt(v) for v in r] for r in _curve_rows(curve)])
        written.append(path)
    for p in written:
        print(p)
    return 0


def geometry_rows(geometry, nt):
    """``(sheet_id, t, gamma, s)`` on a uniform grid over each sheet's time range."""
    rows = []
    for sheet in geometry.sheets:
        t_a, t_b = sheet.t_range
        ts = np.linspace(t_a, t_b, nt)
        if sheet.open_start:
            ts = ts[1:]
        g = np.broadcast_to(sheet.gamma(ts), ts.shape)
        s = np.broadcast_to(sheet.speed(ts), ts.shape)
        rows += [[sheet.id, _fmt(a), _fmt(b), _fmt(c)] for a, b, c in zip(ts, g, s)]
    return rows


def cmd_export_geometry(args):
    if args.run:
        run, ckpt = _load_run(args.run)
        problem = get_problem(run.train.problem)
        geometry, _ = _run_geometry(problem, ckpt)
    else:
        if not args.problem:
            raise UsageError("export-geometry needs --problem or --run")
        geometry = build_geometry(get_problem(args.problem))
    path = args.out or "geometry.csv"
    _write_csv(path, ["sheet_id", "t", "gamma", "s"], geometry_rows(geometry, args.nt))
    print(path)
    return 0


BATCH_HEADERS = {
    "interior": ["t", "phi"],
    "shock": ["t", "phi_minus", "phi_plus", "s", "nu"],
    "boundary": ["t", "phi"],
    "initial": ["t", "phi", "u0"],
}


def batch_tables(batch, d):
    space = ["x", "y"][:d]
    sh = batch.shock
    nu = [f"nu_{c}" for c in space] if d > 1 else ["nu"]
    tables = {
        "interior": (space + ["t", "phi"], batch.interior),
        "shock": (space + ["t", "phi_minus", "phi_plus", "s"] + nu,
                  np.column_stack([sh.minus, sh.plus[:, -1], sh.speed, sh.normal])),
        "initial": (space + ["t", "phi", "u0"], np.column_stack([batch.initial, batch.u0])),
    }
    bd = batch.boundary
    if bd.periodic:
        tables["boundary"] = (space + ["t", "phi"] + [f"{c}_pair" for c in space] + ["phi_pair"],
                              np.column_stack([bd.X, bd.X_pair[:, :d], bd.X_pair[:, -1]]))
    else:
        tables["boundary"] = (space + ["t", "phi", "g"], np.column_stack([bd.X, bd.g]))
    return tables


def cmd_export_batch(args):
    problem = get_problem(args.problem)
    if problem.is_inverse:
        geometry = refresh_geometry(problem, integrate_curve(SpeedGrid.from_setup(problem, args.s_init)),
                                    strict=False)
    else:
        geometry = build_geometry(problem)
    d = problem.defaults
    sizes = args.sizes or (d.n_intrr, d.n_shock, d.n_bndry, d.n_initl)
    _, data_seed = _seeds(args.seed)
    batch = sample_batch(problem, geometry, sizes, data_seed)
    out = args.out or "batch"
    os.makedirs(out, exist_ok=True)
    for name, (header, table) in batch_tables(batch, problem.spatial_dim).items():
        path = os.path.join(out, f"{name}.csv")
        _write_csv(path, header, [[_fmt(v) for v in r] for r in table])
        print(path)
    return 0


def cmd_list_problems(args):
    for name in problem_names():
        p = get_problem(name)
        d = p.defaults
        box = " x ".join(f"[{lo:.6g}, {hi:.6g}]" for lo, hi in p.bounds)
        kind = "inverse" if p.is_inverse else "forward"
        print(f"{name}  d={p.spatial_dim}  domain={box} x [0, {p.T:.6g}]  {kind}  "
              f"net=({d.depth},{d.width})  beta=({d.beta_s:g},{d.beta_b:g},{d.beta_i:g})  "
              f"w_int={d.w_int:g}  N=({d.n_intrr},{d.n_shock},{d.n_bndry},{d.n_initl})  "
              f"test=({d.test_nx},{d.test_nt})  {p.description}")
    return 0


def _key_value(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    return k.strip().split(".")[-1], v


def _sizes(text):
    parts = [int(v) for v in text.replace(",", " ").split()]
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("sizes take four integers: interior,shock,boundary,initial")
    return tuple(parts)


def _floats(text):
    return [float(v) for v in text.replace(",", " ").split()]


def build_parser():
    ap = argparse.ArgumentParser(prog="liftembed", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--strict-determinism", action="store_true",
                       help="single-threaded BLAS so repeated runs are bitwise identical")

    p = sub.add_parser("train", help="train a model and write a run directory")
    common(p)
    p.add_argument("--config", help="sectioned key=value file")
    p.add_argument("--problem")
    p.add_argument("--epochs", type=int)
    p.add_argument("--s-init", type=float, dest="s_init", help="initial shock speed (inverse problems)")
    p.add_argument("--fraction", type=float, help="mini-batch fraction per epoch")
    p.add_argument("--log-every", type=int, dest="log_every")
    p.add_argument("--set", type=_key_value, action="append", metavar="KEY=VALUE",
                   help="override any config key, e.g. --set optim.lr=0.005")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="recompute the relative L2 error of a run")
    common(p)
    p.add_argument("--run", required=True)
    p.add_argument("--nx", type=int)
    p.add_argument("--nt", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export", help="write solution grids, time slices and inferred curves")
    common(p)
    p.add_argument("--run", required=True)
    p.add_argument("--slices", type=_floats, help="comma-separated times for slice CSVs")
    p.add_argument("--nx", type=int)
    p.add_argument("--nt", type=int)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("export-geometry", help="dump shock sheets as (sheet_id, t, gamma, s)")
    common(p)
    p.add_argument("--problem")
    p.add_argument("--run")
    p.add_argument("--nt", type=int, default=201)
    p.set_defaults(func=cmd_export_geometry)

    p = sub.add_parser("export-batch", help="dump the collocation sets as CSV")
    common(p)
    p.add_argument("--problem", required=True)
    p.add_argument("--sizes", type=_sizes)
    p.add_argument("--s-init", type=float, dest="s_init")
    p.set_defaults(func=cmd_export_batch)

    p = sub.add_parser("list-problems", help="list registered problems")
    p.set_defaults(func=cmd_list_problems)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    if getattr(args, "seed", None) is None and args.command in ("export-batch",):
        args.seed = 0
    try:
        return args.func(args)
    except CheckpointError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except TrainingError as err:
        print(f"training failed: {err}", file=sys.stderr)
        return EXIT_TRAINING
    except (UsageError, ConfigurationError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except LiftEmbedError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
