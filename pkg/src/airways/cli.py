"""Command-line front door: plan, simulate, report, and serve.

Exit codes: 0 on success, 1 when the result is infeasible, stalled, or
diverged, 2 on usage errors. Overrides given with --set are applied to the
raw document before validation, and the effective project is re-emitted
next to the outputs so every run is reproducible from its artifacts.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import project_io
from .planner import plan_project
from .simulator import SimulationDiverged, simulate_tracking

_WEIGHT_KEYS = {"lambda_k", "lambda_d", "lambda_t", "lambda_td", "lambda_g",
                "lambda_c", "lambda_s"}


def apply_override(document: dict, spec: str) -> None:
    """Apply one key=value override to a raw project document.

    Dotted keys address nested fields (weights.lambda_k, solver.max_iter);
    bare lambda_* names are shorthand for the weights block. Values parse
    as JSON with a string fallback.
    """
    if "=" not in spec:
        raise ValueError(f"override {spec!r} is not of the form key=value")
    key, raw_value = spec.split("=", 1)
    key = key.strip()
    try:
        value = json.loads(raw_value)
    except json.JSONDecodeError:
        value = raw_value
    if key in _WEIGHT_KEYS:
        key = f"weights.{key}"
    parts = key.split(".")
    node = document
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ValueError(f"cannot override through non-object {part!r}")
    node[parts[-1]] = value


def _load_with_overrides(args) -> "project_io.Project":
    with open(args.project, "rb") as fh:
        document = json.load(fh)
    for spec in args.set or []:
        apply_override(document, spec)
    return project_io.project_from_document(document,
                                            lenient=args.lenient)


def _write_json(path: Path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_plan(args) -> int:
    project = _load_with_overrides(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def progress(iterate):
        if args.verbose:
            print(f"  iteration {iterate.iteration}: "
                  f"cost {iterate.cost:.6g} alpha {iterate.alpha}")

    result = plan_project(project, progress if args.verbose else None)
    project_io.save_project(project, out / "effective_project.json")
    project_io.export_trajectory(result.trajectory, out / "trajectory.csv")
    _write_json(out / "iqp_report.json", result.report.to_dict())
    _write_json(out / "feasibility.json", result.feasibility.to_dict())
    if not args.no_plots:
        project_io.emit_plots(result.trajectory, None, out / "plots",
                              project)
    feasible = result.feasibility.feasible
    print(f"plan: {result.report.termination}, "
          f"{'feasible' if feasible else 'INFEASIBLE'}, "
          f"cost {result.report.iterates[-1].cost:.6g}, "
          f"outputs in {out}")
    return 0 if result.succeeded else 1


def cmd_simulate(args) -> int:
    project = _load_with_overrides(args)
    trajectory = project_io.import_trajectory(args.trajectory)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        log = simulate_tracking(trajectory, project.platform, project.gains,
                                dt_sim=args.dt_sim)
    except SimulationDiverged as exc:
        print(f"simulate: DIVERGED at t={exc.time:.3f}s "
              f"(stage {exc.stage}, error {exc.position_error:.2f} m)")
        return 1
    project_io.export_simlog(log, out / "simlog.csv")
    _write_json(out / "summary.json", log.summary())
    if not args.no_plots:
        project_io.emit_plots(trajectory, log, out / "plots", project)
    print(f"simulate: rms error {log.rms_position_error:.4g} m, "
          f"max {log.max_position_error:.4g} m, outputs in {out}")
    return 0


def cmd_report(args) -> int:
    from .planner import feasibility_report

    project = _load_with_overrides(args)
    trajectory = project_io.import_trajectory(args.trajectory)
    report = feasibility_report(
        trajectory, project.platform, project.input_bounds(),
        project.gimbal_limits, project.obstacles)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "feasibility.json", report.to_dict())
    print(f"report: {'feasible' if report.feasible else 'INFEASIBLE'} "
          f"(dynamics {report.max_dynamics_residual:.3g}, "
          f"inputs {report.max_input_violation:.3g}, "
          f"gimbal {report.max_gimbal_violation:.3g})")
    return 0 if report.feasible else 1


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(Path(args.data_dir), frontend_dir=args.frontend)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="airways",
        description="Design, verify and serve quadrotor camera trajectories.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--project", required=True,
                       help="path to the project JSON document")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a project field before validation "
                            "(repeatable); lambda_* keys address weights")
        p.add_argument("--lenient", action="store_true",
                       help="ignore unknown fields in the project document")
        p.add_argument("--verbose", action="store_true")

    p_plan = sub.add_parser("plan", help="plan a trajectory from a project")
    common(p_plan)
    p_plan.add_argument("--out", required=True, help="output directory")
    p_plan.add_argument("--no-plots", action="store_true")
    p_plan.set_defaults(func=cmd_plan)

    p_sim = sub.add_parser("simulate",
                           help="fly a planned trajectory in simulation")
    common(p_sim)
    p_sim.add_argument("--trajectory", required=True,
                       help="trajectory CSV from a plan run")
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--dt-sim", type=float, default=0.002)
    p_sim.add_argument("--no-plots", action="store_true")
    p_sim.set_defaults(func=cmd_simulate)

    p_rep = sub.add_parser("report",
                           help="re-check feasibility of a trajectory CSV")
    common(p_rep)
    p_rep.add_argument("--trajectory", required=True)
    p_rep.add_argument("--out", default=None)
    p_rep.set_defaults(func=cmd_report)

    p_srv = sub.add_parser("serve", help="start the HTTP service")
    p_srv.add_argument("--port", type=int,
                       default=int(os.environ.get("AIRWAYS_PORT", "8080")))
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--data-dir", default="airways-data",
                       help="directory for stored projects")
    p_srv.add_argument("--frontend", default=None,
                       help="directory with built studio assets")
    p_srv.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except project_io.ProjectError as exc:
        print(f"invalid project: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
