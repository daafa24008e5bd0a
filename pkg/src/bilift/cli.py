"""Command-line front end.

Subcommands: bilinearize, simulate, reach, stabilize, steer.  System files
may be given by path or by the name of a bundled definition (see
``bilift.systems``).  Exit codes: 0 success, 1 input error, 2 closure cap
exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import control as ctl
from . import io as bio
from . import reach as rch
from .closure import AUGMENT, OFFSET, ClosureConfig, ClosureStatus, closure_run
from .errors import BiliftError, InputFileError
from .parser import parse_expr
from .realization import extract_realization, verify_embedding
from .simulate import (
    ControlSchedule,
    consistency_error,
    simulate_nonlinear_rk4,
    simulate_piecewise,
)

_BUNDLED_DIR = Path(__file__).parent / "systems"


def bundled_system_path(name: str) -> Path:
    return _BUNDLED_DIR / (name if name.endswith(".json") else f"{name}.json")


def _resolve_system(path_arg: str) -> Path:
    p = Path(path_arg)
    if p.exists():
        return p
    candidate = bundled_system_path(path_arg)
    if candidate.exists():
        return candidate
    raise InputFileError(f"no system file {path_arg!r} (and no bundled system of that name)")


def _parse_state(text: str, n: int) -> np.ndarray:
    parts = [p for p in text.replace(" ", "").split(",") if p]
    if len(parts) != n:
        raise InputFileError(f"state needs {n} components, got {len(parts)}")
    try:
        return np.array([float(p) for p in parts])
    except ValueError as exc:
        raise InputFileError(f"bad state value: {exc}") from exc


def cmd_bilinearize(args) -> int:
    system, file_gamma0 = bio.load_system(_resolve_system(args.system))
    gamma0 = file_gamma0
    if args.gamma0:
        gamma0 = [parse_expr(s, system.n) for s in args.gamma0.split(",")]
    cfg = ClosureConfig(
        gamma0=gamma0,
        max_dim=args.max_dim,
        max_iter=args.max_iter,
        constant_mode=args.constants,
    )
    outcome = closure_run(system, cfg)
    print(f"system: {system.name or args.system}")
    print(f"status: {outcome.status.value}")
    print(f"chain dims: {list(outcome.chain_dims)}")
    if not outcome.stabilized:
        print("no realization extracted (closure did not stabilize)")
        return 2
    real = extract_realization(system, outcome)
    report = verify_embedding(real)
    print(f"k_star: {outcome.k_star}")
    print(f"lifted dimension r: {real.r}")
    print(f"basis: {[str(g) for g in real.psi]}")
    print(f"embedding: graph={report.is_graph_over_coordinates} verdict={report.verdict.value}")
    if args.output:
        bio.save_realization(real, args.output)
        print(f"wrote {args.output}")
    return 0


def _load_pair(args):
    system, _ = bio.load_system(_resolve_system(args.system))
    real = bio.load_realization(args.realization)
    if real.n != system.n or real.m != system.m:
        raise InputFileError(
            f"realization ({real.n} states, {real.m} controls) does not match "
            f"system ({system.n} states, {system.m} controls)"
        )
    return system, real


def cmd_simulate(args) -> int:
    system, real = _load_pair(args)
    x0 = _parse_state(args.x0, system.n)
    if args.control:
        sched = bio.load_schedule(args.control)
    else:
        sched = ControlSchedule.zero(system.m, args.t_final)
    if sched.t_final <= sched.t0:
        raise InputFileError("schedule must span a positive horizon")
    lifted = simulate_piecewise(real, sched, x0, samples_per_segment=args.samples_per_segment)
    original = simulate_nonlinear_rk4(system, sched, x0, args.dt)
    err = consistency_error(system, real, sched, x0, args.dt)
    out = Path(args.output)
    bio.write_trajectory_csv(original, out)
    lifted_path = out.with_name(out.stem + "_lifted" + out.suffix)
    bio.write_trajectory_csv(lifted, lifted_path)
    print(f"consistency error: {err:.6e}")
    print(f"wrote {out} and {lifted_path}")
    return 0


def cmd_reach(args) -> int:
    system, real = _load_pair(args)
    x0 = _parse_state(args.x0, system.n)
    span = rch.flow_adjoint_span(real)
    holds = span.hypothesis_holds
    print(f"dim h: {span.dim}")
    print(f"commutation hypothesis: {holds}")
    samples = rch.reach_sample(
        real, span, x0, args.t_final, args.coeff_box, args.samples, seed=args.seed
    )
    if samples.heuristic:
        print("label: heuristic (inner approximation; hypothesis failed)")
    else:
        print("label: exact (hypothesis holds)")
    bio.write_reach_csv(samples.coeffs, samples.points, args.output)
    print(f"wrote {args.output} ({samples.count} rows)")
    return 0


def cmd_stabilize(args) -> int:
    system, real = _load_pair(args)
    x0 = _parse_state(args.x0, system.n)
    cfg = ctl.default_stabilizer(real, epsilon=args.epsilon)
    result = ctl.closed_loop_simulate(
        system, real, cfg, x0, args.t_final, args.dt,
        x_eq=_parse_state(args.x_eq, system.n) if args.x_eq else None,
    )
    print(f"V non-increasing: {result.v_nonincreasing}")
    print(f"V(0) = {result.v_series[0]:.6e}  V(T) = {result.v_final:.6e}")
    if result.final_error is not None:
        print(f"final distance to equilibrium: {result.final_error:.6e}")
    bio.write_vseries_csv(
        result.trajectory.times, result.trajectory.states, result.v_series, args.output
    )
    print(f"wrote {args.output}")
    return 0


def cmd_steer(args) -> int:
    system, real = _load_pair(args)
    if args.segments < 1:
        raise InputFileError("need at least one segment")
    x0 = _parse_state(args.x0, system.n)
    xf = _parse_state(args.xf, system.n)
    prob = ctl.SteeringProblem(
        x0=tuple(x0),
        x_target=tuple(xf),
        t_final=args.t_final,
        segments=args.segments,
        u_bound=args.u_bound,
    )
    opts = ctl.SteerOptions(starts=args.starts, seed=args.seed)
    t_begin = time.perf_counter()
    result = ctl.steer_optimize(real, prob, opts)
    elapsed = time.perf_counter() - t_begin
    achieved = ctl._endpoints_batch(
        real, prob, np.array(result.schedule.values)[None]
    )[0]
    print(f"J* = {result.cost:.6e}  iterations = {result.iterations}  time = {elapsed:.2f}s")
    bio.save_schedule(result.schedule, args.output)
    report = {
        "initial": list(map(float, x0)),
        "target": list(map(float, xf)),
        "achieved": [float(v) for v in achieved],
        "cost": result.cost,
        "iterations": result.iterations,
        "improved": result.improved,
        "wall_time_s": elapsed,
    }
    report_path = Path(args.output).with_suffix(".report.json")
    report_path.write_text(json.dumps(report, indent=2) + "\n")
    print(f"wrote {args.output} and {report_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bilift",
        description="Exact bilinearization of control-affine systems and "
        "analysis/control on the lifted form.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bilinearize", help="run the closure iteration and extract matrices")
    p.add_argument("system", help="system JSON path or bundled name")
    p.add_argument("--gamma0", help="comma-separated seed expressions (overrides file)")
    p.add_argument("--max-dim", type=int, default=200)
    p.add_argument("--max-iter", type=int, default=50)
    p.add_argument("--constants", choices=[OFFSET, AUGMENT], default=OFFSET)
    p.add_argument("-o", "--output", help="write realization JSON here")
    p.set_defaults(func=cmd_bilinearize)

    p = sub.add_parser("simulate", help="simulate both representations and cross-check")
    p.add_argument("system")
    p.add_argument("--realization", required=True)
    p.add_argument("--control", help="schedule JSON (default: zero control)")
    p.add_argument("--x0", required=True, help="comma-separated initial state")
    p.add_argument("--t-final", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--samples-per-segment", type=int, default=50)
    p.add_argument("-o", "--output", default="traj.csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reach", help="sample the reachable set of the lifted form")
    p.add_argument("system")
    p.add_argument("--realization", required=True)
    p.add_argument("--x0", required=True)
    p.add_argument("--T", dest="t_final", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--coeff-box", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("-o", "--output", default="reach.csv")
    p.set_defaults(func=cmd_reach)

    p = sub.add_parser("stabilize", help="closed-loop run under the Lyapunov feedback")
    p.add_argument("system")
    p.add_argument("--realization", required=True)
    p.add_argument("--x0", required=True)
    p.add_argument("--x-eq", help="target equilibrium for the final-distance report")
    p.add_argument("--t-final", type=float, default=20.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("-o", "--output", default="stabilize.csv")
    p.set_defaults(func=cmd_stabilize)

    p = sub.add_parser("steer", help="optimal steering over piecewise-constant controls")
    p.add_argument("system")
    p.add_argument("--realization", required=True)
    p.add_argument("--x0", required=True)
    p.add_argument("--xf", required=True)
    p.add_argument("--segments", type=int, default=4)
    p.add_argument("--t-final", type=float, default=4.0)
    p.add_argument("--u-bound", type=float)
    p.add_argument("--starts", type=int, default=8)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("-o", "--output", default="schedule.json")
    p.set_defaults(func=cmd_steer)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BiliftError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
