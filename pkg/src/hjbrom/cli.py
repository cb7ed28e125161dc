"""Command-line front end for the benchmark pipeline.

Every subcommand accepts ``--config FILE`` (flat ``key = value`` text, see
the README), repeatable ``--set key=value`` overrides and ``--out DIR`` for
artifacts.  Exit codes: 0 success, 1 any cell or runtime failure, 2
configuration error.
"""

import argparse
import os
import sys

import numpy as np

from . import benchmarks as bench
from .errors import ConfigError
from .hjb import closed_loop
from .models import simulate

_SNAPSHOT_METHODS = ("POD", "PODadj")


def _add_common(parser):
    parser.add_argument("--config", help="scenario configuration file")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a configuration key (repeatable)",
    )
    parser.add_argument("--out", default=".", help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hjbrom",
        description="Reduced-order HJB feedback control benchmarks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="open-loop simulation to CSV")
    _add_common(p)
    p.add_argument("--ic", default="fig", help="initial state name (fig, zero, ...)")
    p.add_argument(
        "--control",
        default="zero",
        choices=("zero", "sin"),
        help="open-loop input signal",
    )

    p = sub.add_parser("lqr", help="exact LQR reference: gain, trajectory, cost")
    _add_common(p)
    p.add_argument("--ic", default="fig")

    p = sub.add_parser("reduce", help="export reduction bases")
    _add_common(p)
    p.add_argument("--method", default=None, help="single method (default: all)")
    p.add_argument("--order", type=int, default=None, help="basis order")

    p = sub.add_parser("hjb", help="solve the reduced HJB problem")
    _add_common(p)
    p.add_argument("--method", required=True)
    p.add_argument("--order", type=int, required=True)

    p = sub.add_parser("closed-loop", help="closed-loop run under HJB feedback")
    _add_common(p)
    p.add_argument("--method", required=True)
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--ic", default="fig")

    p = sub.add_parser("table1", help="value-function comparison report")
    _add_common(p)

    p = sub.add_parser("table2", help="closed-loop cost comparison report")
    _add_common(p)
    return parser


def _thin(array, max_rows=2001):
    stride = max(1, -(-len(array) // max_rows))
    return array[::stride]


def _canonical_method(name):
    key = name.strip().lower()
    if key not in bench._METHOD_ALIASES:
        raise ConfigError(f"unknown method {name!r}")
    return bench._METHOD_ALIASES[key]


def _cmd_simulate(cfg, args):
    system = bench.build_system(cfg)
    x0 = bench.initial_state(cfg, system, args.ic)
    control = np.sin if args.control == "sin" else None
    traj = simulate(system, x0, control, cfg.dt_sim, cfg.horizon)
    path = os.path.join(args.out, "trajectory.csv")
    traj.to_csv(path)
    bench.write_series(
        os.path.join(args.out, "output_trace.dat"),
        [_thin(traj.times), _thin(traj.outputs[:, 0])],
        header=("t", "z"),
    )
    print(f"wrote {path} ({traj.times.size} steps)")
    return 0


def _cmd_lqr(cfg, args):
    system = bench.build_system(cfg)
    lqr = bench.run_lqr_reference(system)
    x0 = bench.initial_state(cfg, system, args.ic)
    controlled = bench.closed_loop_lqr(system, lqr, x0, cfg.dt_sim, cfg.horizon)
    uncontrolled = simulate(system, x0, None, cfg.dt_sim, cfg.horizon)
    cost = bench.quadrature_cost(
        controlled, cfg.output_weight, cfg.control_weight, cfg.discount
    )
    bench.write_series(
        os.path.join(args.out, "lqr_gain.dat"),
        [system.grid, lqr.gain[0]],
        header=("xi", "gain"),
    )
    snap = int(round(0.3 / cfg.dt_sim))
    snap = min(snap, controlled.times.size - 1)
    bench.write_series(
        os.path.join(args.out, "lqr_state_snapshot.dat"),
        [system.grid, x0, uncontrolled.states[snap], controlled.states[snap]],
        header=("xi", "initial", "uncontrolled", "controlled"),
    )
    bench.write_series(
        os.path.join(args.out, "lqr_control_trace.dat"),
        [_thin(controlled.times), _thin(controlled.controls[:, 0])],
        header=("t", "u_LQR"),
    )
    print(f"closed-loop cost {cost:.17g}; value x^T P x = {lqr.value(x0):.17g}")
    return 0


def _cmd_reduce(cfg, args):
    system = bench.build_system(cfg)
    methods = (
        [_canonical_method(args.method)] if args.method else list(cfg.methods)
    )
    order = args.order or max(cfg.orders)
    forward = None
    if any(m in _SNAPSHOT_METHODS for m in methods):
        forward = bench.snapshot_forward(cfg, system)
    for method in methods:
        reducer = bench._fit_reducer(cfg, method, order, system, forward)
        path = os.path.join(args.out, f"basis_{method}.csv")
        reducer.basis_.to_csv(path)
        print(f"wrote {path}")
    return 0


def _cmd_hjb(cfg, args):
    system = bench.build_system(cfg)
    method = _canonical_method(args.method)
    forward = (
        bench.snapshot_forward(cfg, system) if method in _SNAPSHOT_METHODS else None
    )
    _, solver = bench.fit_hjb_cell(cfg, method, args.order, system, forward)
    path = os.path.join(args.out, f"hjb_{method}_l{args.order}.txt")
    solver.grid_.save(path)
    axis = solver.grid_.axes[0]
    slice_points = np.zeros((axis.size, solver.grid_.ndim))
    slice_points[:, 0] = axis
    bench.write_series(
        os.path.join(args.out, f"value_slice_{method}_l{args.order}.dat"),
        [axis, solver.reduced_value(slice_points)],
        header=("y1", "value"),
    )
    print(
        f"wrote {path} (iterations {solver.n_iter_}, "
        f"final increment {solver.final_increment_:.3e}, "
        f"converged {solver.converged_})"
    )
    return 0


def _cmd_closed_loop(cfg, args):
    system = bench.build_system(cfg)
    method = _canonical_method(args.method)
    forward = (
        bench.snapshot_forward(cfg, system) if method in _SNAPSHOT_METHODS else None
    )
    _, solver = bench.fit_hjb_cell(cfg, method, args.order, system, forward)
    x0 = bench.initial_state(cfg, system, args.ic)
    traj = closed_loop(solver, system, x0, cfg.dt_sim, cfg.horizon)
    cost = bench.quadrature_cost(
        traj, cfg.output_weight, cfg.control_weight, cfg.discount
    )
    lqr = bench.run_lqr_reference(system)
    reference = bench.closed_loop_lqr(system, lqr, x0, cfg.dt_sim, cfg.horizon)
    path = os.path.join(args.out, f"closed_loop_{method}_l{args.order}.csv")
    traj.to_csv(path)
    bench.write_series(
        os.path.join(args.out, f"control_trace_{method}_l{args.order}.dat"),
        [
            _thin(traj.times),
            _thin(reference.controls[:, 0]),
            _thin(traj.controls[:, 0]),
        ],
        header=("t", "u_LQR", f"u_{method}"),
    )
    print(f"wrote {path}; closed-loop cost {cost:.17g}")
    return 0


def _report_command(runner):
    def run(cfg, args):
        report = runner(cfg)
        paths = bench.emit_report(report, args.out)
        for path in paths:
            print(f"wrote {path}")
        for key, message in sorted(report.failures.items()):
            print(f"cell {key} failed: {message}", file=sys.stderr)
        return 1 if report.failures else 0

    return run


_COMMANDS = {
    "simulate": _cmd_simulate,
    "lqr": _cmd_lqr,
    "reduce": _cmd_reduce,
    "hjb": _cmd_hjb,
    "closed-loop": _cmd_closed_loop,
    "table1": _report_command(bench.run_table1),
    "table2": _report_command(bench.run_table2),
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = bench.load_config(args.config, args.overrides)
        os.makedirs(args.out, exist_ok=True)
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure of a requested computation
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
