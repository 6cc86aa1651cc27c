"""Command-line interface.

Every subcommand writes its outputs into ``--out`` together with a
``report.json`` describing the run. Exit codes: 0 success, 2 bad input,
3 solver failure, 4 I/O failure.
"""
import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .barycenter import gdtw_barycenter
from .baselines import Invariance, dtw_gi
from .distribution import GROUNDS, dataset_distance
from .dtw import AlignmentPath, dtw, soft_argmin, soft_dtw
from .gdtw import FwOptions, gdtw, soft_gdtw
from .imitate import ImitationProblem, imitate
from .series import (
    FIXTURE_KINDS,
    WassersteinGrid,
    apply_isometry,
    cross_distances,
    gen_fixture,
    load_series,
    normalize,
    render_grid_video,
    rotation_2d,
    save_series,
)

EXIT_INPUT, EXIT_SOLVER, EXIT_IO = 2, 3, 4
METHODS = ("dtw", "soft-dtw", "gdtw", "soft-gdtw", "dtw-gi")


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _fmt(v):
    return repr(float(v))


def _write_csv(path, header, rows):
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            if header:
                writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v
                                 for v in row])
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from None


def _read_csv(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_INPUT) from None
    if not rows:
        raise CliError(f"{path}: empty file", EXIT_INPUT)
    return rows[0], rows[1:]


def _load(path, header=False):
    try:
        return load_series(path, header=header)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CliError(f"cannot parse {path}: {exc}", EXIT_INPUT) from None


def _load_one(path, header=False):
    return _load(path, header)[0]


def _outdir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create {path}: {exc}", EXIT_IO) from None
    return path


def _fw_opts(args, gamma=0.0, normalize_inputs=True):
    try:
        return FwOptions(gamma=gamma, max_iter=args.max_iter, restarts=args.restarts,
                         tol=args.tol, normalize_inputs=normalize_inputs, seed=args.seed)
    except ValueError as exc:
        raise CliError(f"invalid solver options: {exc}", EXIT_INPUT) from None


def _resolve_normalize(args):
    if args.normalize is not None:
        return args.normalize
    return args.method in ("gdtw", "soft-gdtw")


def _run_alignment(args):
    """Shared by ``align`` and ``dist``: returns (value, matrix, trace rows, extra)."""
    x = _load_one(args.x, args.header)
    y = _load_one(args.y, args.header)
    norm = _resolve_normalize(args)
    method = args.method
    extra = {}
    if method in ("dtw", "soft-dtw"):
        C = cross_distances(x, y)
        if norm:
            C = normalize(C)
        if method == "dtw":
            value, path = dtw(C)
            return value, path.matrix(), [], extra
        value = soft_dtw(C, args.gamma)
        return value, soft_argmin(C, args.gamma).weights, [], extra
    if method == "dtw-gi":
        res = dtw_gi(x, y, Invariance(args.invariance), iters=args.gi_iters)
        extra = {"rotation": res.rotation.tolist(), "translation": res.translation.tolist()}
        rows = [(k, v, v) for k, v in enumerate(res.trace)]
        return res.value, res.path.matrix(), rows, extra
    if method == "gdtw":
        res = gdtw(x, y, _fw_opts(args, 0.0, norm))
    else:
        res = soft_gdtw(x, y, _fw_opts(args, args.gamma, norm))
    extra = {"status": res.status.value, "period": res.period,
             "restart_index": res.restart_index, "iterations": res.iterations}
    rows = [(k, b, r) for k, (b, r) in enumerate(zip(res.objective_trace, res.raw_trace))]
    return res.value, res.alignment.matrix(), rows, extra


def cmd_align(args):
    value, A, trace_rows, extra = _run_alignment(args)
    out = _outdir(args.out)
    ii, jj = np.nonzero(A)
    _write_csv(os.path.join(out, "alignment.csv"), ["i", "j", "weight"],
               [(int(i), int(j), float(A[i, j])) for i, j in zip(ii, jj)])
    outputs = ["alignment.csv"]
    if trace_rows:
        _write_csv(os.path.join(out, "trace.csv"), ["iteration", "objective", "raw"], trace_rows)
        outputs.append("trace.csv")
    return {"value": value, "shape": list(A.shape), **extra}, outputs


def cmd_dist(args):
    value, _, _, extra = _run_alignment(args)
    _outdir(args.out)
    print(_fmt(value))
    return {"value": value, **extra}, []


def cmd_dataset_dist(args):
    setA = [s for p in args.a for s in _load(p, args.header)]
    setB = [s for p in args.b for s in _load(p, args.header)]
    opts = _fw_opts(args, 0.0, not args.no_normalize)
    res = dataset_distance(setA, setB, epsilon=args.epsilon, ground=args.ground,
                           gamma=args.gamma, opts=opts, debiased=args.debiased,
                           max_iters=args.sinkhorn_iters, tol=args.sinkhorn_tol,
                           n_jobs=args.threads, return_details=True)
    out = _outdir(args.out)
    _write_csv(os.path.join(out, "cost.csv"), None, [list(map(float, r)) for r in res.cost])
    _write_csv(os.path.join(out, "coupling.csv"), None,
               [list(map(float, r)) for r in res.coupling.matrix])
    return {"value": res.value, "transport": res.transport, "epsilon": res.epsilon,
            "n_a": len(setA), "n_b": len(setB)}, ["cost.csv", "coupling.csv"]


def cmd_barycenter(args):
    series = [s for p in args.inputs for s in _load(p, args.header)]
    opts = _fw_opts(args, args.gamma, not args.no_normalize)
    res = gdtw_barycenter(series, T=args.length, opts=opts, outer_iters=args.outer_iters,
                          tol=args.tol, embed_dim=args.embed_dim)
    out = _outdir(args.out)
    _write_csv(os.path.join(out, "barycenter_distances.csv"), None,
               [list(map(float, r)) for r in res.distance_matrix])
    outputs = ["barycenter_distances.csv"]
    if res.embedded is not None:
        _save(os.path.join(out, "barycenter.csv"), res.embedded)
        outputs.append("barycenter.csv")
    _write_csv(os.path.join(out, "trace.csv"), ["iteration", "objective", "raw"],
               [(k, v, v) for k, v in enumerate(res.objective_trace)])
    outputs.append("trace.csv")
    objective = res.objective_trace[-1] if res.objective_trace else 0.0
    return {"objective": objective, "iterations": res.iterations,
            "converged": res.converged, "length": len(res.distance_matrix)}, outputs


def cmd_imitate(args):
    expert = _load_one(args.expert, args.header)
    opts = FwOptions(max_iter=args.max_iter, restarts=0, tol=args.tol, seed=args.seed)
    problem = ImitationProblem(
        expert=expert, horizon=args.horizon or len(expert),
        start_state=np.zeros(2), a_max=args.a_max, gamma=args.gamma,
        learn_rate=args.lr, steps=args.steps, opts=opts, seed=args.seed)
    res = imitate(problem)
    out = _outdir(args.out)
    _write_csv(os.path.join(out, "loss.csv"), ["step", "loss"],
               [(k, float(v)) for k, v in enumerate(res.loss_history)])
    _save(os.path.join(out, "trajectory.csv"), res.trajectory)
    _write_csv(os.path.join(out, "actions.csv"), None, [list(map(float, a)) for a in res.actions])
    h = res.loss_history
    return {"initial_loss": h[0], "final_loss": h[-1],
            "ratio": h[-1] / h[0] if h[0] > 0 else 0.0}, \
        ["loss.csv", "trajectory.csv", "actions.csv"]


def cmd_fixture(args):
    try:
        ts = gen_fixture(args.kind, args.T, args.seed)
        if args.rotate or args.translate:
            t = [float(v) for v in args.translate.split(",")] if args.translate else None
            ts = apply_isometry(ts, rotation_2d(np.deg2rad(args.rotate)), t)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None
    out = _outdir(args.out)
    if args.grid:
        h, w = (int(v) for v in args.grid.lower().split("x"))
        ts = render_grid_video(ts, (h, w), metric=WassersteinGrid())
        name = "series.json"
    else:
        name = "series.csv"
    _save(os.path.join(out, name), ts)
    return {"T": len(ts), "kind": args.kind}, [name]


def _save(path, ts):
    try:
        save_series(path, ts)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from None


def cmd_plotdata(args):
    from .plotting import alignment_figure, save_figure, trace_figure, trajectory_figure

    run = args.run
    out = _outdir(args.out)
    outputs = []
    if args.kind == "alignment":
        _, rows = _read_csv(os.path.join(run, "alignment.csv"))
        data = [(int(i), int(j), float(w)) for i, j, w in rows]
        _write_csv(os.path.join(out, "alignment.csv"), ["t_x", "t_y", "weight"], data)
        fig = alignment_figure(*zip(*data)) if args.svg else None
    elif args.kind == "trace":
        _, rows = _read_csv(os.path.join(run, "trace.csv"))
        data = [(int(k), float(b), float(r)) for k, b, r in rows]
        _write_csv(os.path.join(out, "trace.csv"), ["iteration", "objective", "raw"], data)
        fig = trace_figure(*zip(*data)) if args.svg else None
    else:
        try:
            pts = load_series(os.path.join(run, "trajectory.csv"))[0].points
        except (OSError, ValueError) as exc:
            raise CliError(f"cannot read trajectory: {exc}", EXIT_INPUT) from None
        loss = None
        if os.path.exists(os.path.join(run, "loss.csv")):
            _, rows = _read_csv(os.path.join(run, "loss.csv"))
            loss = [float(v) for _, v in rows]
        _write_csv(os.path.join(out, "trajectory.csv"), ["t", "x", "y"],
                   [(k, float(p[0]), float(p[1])) for k, p in enumerate(pts)])
        fig = trajectory_figure(pts, loss) if args.svg else None
    outputs.append(f"{args.kind}.csv")
    if fig is not None:
        path = os.path.join(out, f"{args.kind}.svg")
        try:
            save_figure(fig, path)
        except OSError as exc:
            raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from None
        outputs.append(f"{args.kind}.svg")
    return {"kind": args.kind}, outputs


def _add_solver_flags(p):
    p.add_argument("--max-iter", type=int, default=25)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--tol", type=float, default=1e-6)


def build_parser():
    parser = argparse.ArgumentParser(prog="gdtw", description="Gromov DTW toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (defaults to $GDTW_THREADS or 1)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--header", action="store_true", help="CSV inputs have a header row")
        if seed:
            p.add_argument("--seed", type=int, default=0)

    for name, fn, hlp in (("align", cmd_align, "align two series"),
                          ("dist", cmd_dist, "distance between two series")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("x")
        p.add_argument("y")
        p.add_argument("--method", choices=METHODS, default="gdtw")
        p.add_argument("--gamma", type=float, default=1.0)
        p.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=None)
        p.add_argument("--invariance", choices=[i.value for i in Invariance], default="rotation")
        p.add_argument("--gi-iters", type=int, default=30)
        _add_solver_flags(p)
        common(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("dataset-dist", help="entropic OT between two sets of series")
    p.add_argument("--a", nargs="+", required=True)
    p.add_argument("--b", nargs="+", required=True)
    p.add_argument("--ground", choices=GROUNDS, default="gdtw")
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--debiased", action="store_true")
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--sinkhorn-iters", type=int, default=1000)
    p.add_argument("--sinkhorn-tol", type=float, default=1e-6)
    _add_solver_flags(p)
    common(p)
    p.set_defaults(func=cmd_dataset_dist)

    p = sub.add_parser("barycenter", help="GDTW barycenter of several series")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--length", type=int, default=None)
    p.add_argument("--outer-iters", type=int, default=30)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--embed-dim", type=int, default=2)
    p.add_argument("--no-normalize", action="store_true")
    _add_solver_flags(p)
    common(p)
    p.set_defaults(func=cmd_barycenter)

    p = sub.add_parser("imitate", help="imitate an expert trajectory")
    p.add_argument("expert")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--lr", type=float, default=5e-3)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--a-max", type=float, default=1.0)
    p.add_argument("--max-iter", type=int, default=25)
    p.add_argument("--tol", type=float, default=1e-6)
    common(p)
    p.set_defaults(func=cmd_imitate)

    p = sub.add_parser("fixture", help="write a synthetic curve")
    p.add_argument("--kind", choices=FIXTURE_KINDS, required=True)
    p.add_argument("--T", type=int, default=40)
    p.add_argument("--rotate", type=float, default=0.0, help="rotation in degrees")
    p.add_argument("--translate", default=None, help="translation 'dx,dy'")
    p.add_argument("--grid", default=None, help="render as a density-grid video, e.g. 16x16")
    common(p)
    p.set_defaults(func=cmd_fixture)

    p = sub.add_parser("plotdata", help="figure data (and SVG) from a run directory")
    p.add_argument("run")
    p.add_argument("--kind", choices=("alignment", "trace", "trajectory"), required=True)
    p.add_argument("--svg", action="store_true")
    common(p, seed=False)
    p.set_defaults(func=cmd_plotdata)
    return parser


def _parameters(args):
    skip = {"func", "command"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None:
        os.environ["GDTW_THREADS"] = str(args.threads)
    start = time.perf_counter()
    try:
        results, outputs = args.func(args)
        status, code = "ok", 0
    except CliError as exc:
        print(f"gdtw {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except (ValueError, FloatingPointError, RuntimeError) as exc:
        print(f"gdtw {args.command}: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    report = {
        "command": args.command,
        "parameters": _parameters(args),
        "seed": getattr(args, "seed", None),
        "wall_time_ms": round(1000 * (time.perf_counter() - start), 3),
        "outputs": outputs,
        "status": status,
        "results": results,
    }
    path = os.path.join(args.out, "report.json")
    try:
        with open(path, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
    except OSError as exc:
        print(f"gdtw {args.command}: cannot write {path}: {exc}", file=sys.stderr)
        return EXIT_IO
    return code


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, AlignmentPath):
        return obj.steps.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


if __name__ == "__main__":
    sys.exit(main())
