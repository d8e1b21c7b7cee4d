"""Project file format, trajectory/simulation exports, and plots.

A project is a single JSON document (top-level "version": 1) that fully
describes a planning problem: platform constants, timing, keyframes and
camera targets, obstacles, gimbal limits, cost weights, and solver/IQP/
controller settings. Loading validates strictly (unknown fields are
rejected unless lenient), materializes every default, and reports errors
as "field: constraint" so callers can surface them verbatim.
"""

from __future__ import annotations

import io
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .costs import CostWeights, GimbalLimits, Keyframe, KeyTarget
from .dynamics import (
    DEFAULT_BETA,
    DEFAULT_GRAVITY,
    InputBounds,
    PlatformParams,
    derive_input_bounds,
)
from .planner import (
    DEFAULT_OBSTACLE_MARGIN,
    IqpSettings,
    Obstacle,
    Trajectory,
)
from .qpsolver import QPSettings
from .simulator import ControllerGains, SimLog

TRAJECTORY_COLUMNS = [
    "t", "rx", "ry", "rz", "yaw", "vx", "vy", "vz", "yaw_rate",
    "Fx", "Fy", "Fz", "M_yaw", "gimbal_yaw", "gimbal_pitch",
    "tx", "ty", "tz",
]

SIMLOG_COLUMNS = [
    "t", "x", "y", "z", "vx", "vy", "vz", "yaw",
    "wx", "wy", "wz", "u1", "u2", "u3", "u4",
    "ref_x", "ref_y", "ref_z", "position_error",
]


class ProjectError(ValueError):
    """Validation failure; `errors` holds (field, message) pairs."""

    def __init__(self, errors):
        if isinstance(errors, tuple):
            errors = [errors]
        self.errors = errors
        super().__init__("; ".join(f"{f}: {m}" for f, m in errors))


def _fail(field_path: str, message: str):
    raise ProjectError((field_path, message))


@dataclass
class Project:
    """A fully validated planning problem with all defaults materialized."""

    platform: PlatformParams
    beta: float
    dt: float
    horizon: float
    keyframes: list
    keytargets: list
    target_half_height: float
    obstacles: list
    gimbal_limits: GimbalLimits | None
    weights: CostWeights
    quad_derivative_order: int
    target_derivative_order: int
    gimbal_derivative_order: int
    solver_settings: QPSettings
    iqp_settings: IqpSettings
    gains: ControllerGains

    @property
    def num_stages(self) -> int:
        return int(round(self.horizon / self.dt)) + 1

    def input_bounds(self) -> InputBounds:
        return derive_input_bounds(self.platform, self.beta)


_WEIGHT_NAMES = ("lambda_k", "lambda_d", "lambda_t", "lambda_td",
                 "lambda_g", "lambda_c", "lambda_s")

_SOLVER_FIELDS = {
    "eps_abs": 1e-6, "eps_rel": 1e-6, "max_iter": 20000, "rho": 0.1,
    "sigma": 1e-6, "over_relaxation": 1.6, "adaptive_rho_interval": 50,
    "check_interval": 25, "scaling_iters": 0, "polish": True,
}

_IQP_FIELDS = {
    "max_iterations": 50, "relative_decrease": 1e-4, "alpha_min": 1e-4,
    "backtrack": 0.5,
}


def _require_mapping(doc, path):
    if not isinstance(doc, dict):
        _fail(path, "must be an object")
    return doc


def _check_unknown(doc: dict, known, path: str, lenient: bool):
    if lenient:
        return
    for key in doc:
        if key not in known:
            _fail(f"{path}.{key}" if path else key, "unknown field")


def _get_number(doc, key, path, default=None, minimum=None,
                strictly_positive=False):
    if key not in doc or doc[key] is None:
        if default is None:
            _fail(f"{path}{key}", "required field missing")
        return float(default)
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail(f"{path}{key}", "must be a number")
    v = float(v)
    if strictly_positive and not v > 0:
        _fail(f"{path}{key}", "must be strictly positive")
    if minimum is not None and v < minimum:
        _fail(f"{path}{key}", f"must be >= {minimum}")
    return v


def _get_int(doc, key, path, default=None, minimum=None):
    if key not in doc or doc[key] is None:
        if default is None:
            _fail(f"{path}{key}", "required field missing")
        return int(default)
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, int):
        _fail(f"{path}{key}", "must be an integer")
    if minimum is not None and v < minimum:
        _fail(f"{path}{key}", f"must be >= {minimum}")
    return v


def _get_vec3(doc, key, path, default=None):
    if key not in doc or doc[key] is None:
        if default is None:
            _fail(f"{path}{key}", "required field missing")
        return np.asarray(default, dtype=float)
    v = doc[key]
    if (not isinstance(v, list) or len(v) != 3
            or any(isinstance(c, bool) or not isinstance(c, (int, float))
                   for c in v)):
        _fail(f"{path}{key}", "must be a list of 3 numbers")
    return np.array(v, dtype=float)


def _get_range(doc, key, path, default):
    if key not in doc or doc[key] is None:
        return tuple(default)
    v = doc[key]
    if (not isinstance(v, list) or len(v) != 2
            or any(isinstance(c, bool) or not isinstance(c, (int, float))
                   for c in v)):
        _fail(f"{path}{key}", "must be a [min, max] pair")
    if not v[0] < v[1]:
        _fail(f"{path}{key}", "min must be < max")
    return float(v[0]), float(v[1])


def _parse_platform(doc, lenient):
    platform = _require_mapping(doc.get("platform"), "platform") \
        if "platform" in doc else _fail("platform", "required field missing")
    known = {"mass", "inertia", "rotor_thrust_coeff", "rotor_moment_coeff",
             "arm_length", "rotor_force_max", "rotor_moment_max", "gravity"}
    _check_unknown(platform, known, "platform", lenient)
    inertia = _get_vec3(platform, "inertia", "platform.")
    if np.any(inertia <= 0):
        _fail("platform.inertia", "entries must be strictly positive")
    try:
        return PlatformParams(
            mass=_get_number(platform, "mass", "platform.",
                             strictly_positive=True),
            inertia_body=np.diag(inertia),
            rotor_thrust_coeff=_get_number(
                platform, "rotor_thrust_coeff", "platform.",
                strictly_positive=True),
            rotor_moment_coeff=_get_number(
                platform, "rotor_moment_coeff", "platform.",
                strictly_positive=True),
            arm_length=_get_number(platform, "arm_length", "platform.",
                                   strictly_positive=True),
            rotor_force_max=_get_number(platform, "rotor_force_max",
                                        "platform.", strictly_positive=True),
            rotor_moment_max=_get_number(platform, "rotor_moment_max",
                                         "platform.", strictly_positive=True),
            gravity=_get_number(platform, "gravity", "platform.",
                                default=DEFAULT_GRAVITY,
                                strictly_positive=True),
        )
    except ValueError as exc:
        _fail("platform", str(exc))


def _parse_anchors(doc, key, num_stages, cls, path, lenient,
                   with_weight=False):
    entries = doc.get(key, [])
    if entries is None:
        entries = []
    if not isinstance(entries, list):
        _fail(key, "must be a list")
    out = []
    last_stage = -1
    known = {"stage", "position", "weight"} if with_weight \
        else {"stage", "position"}
    for idx, entry in enumerate(entries):
        p = f"{key}[{idx}]"
        _require_mapping(entry, p)
        _check_unknown(entry, known, p, lenient)
        stage = _get_int(entry, "stage", f"{p}.", minimum=0)
        if stage >= num_stages:
            _fail(f"{p}.stage", f"out of range [0, {num_stages})")
        if stage <= last_stage:
            _fail(f"{p}.stage", "stages must be strictly increasing")
        last_stage = stage
        position = _get_vec3(entry, "position", f"{p}.")
        if with_weight:
            weight = entry.get("weight", 1.0)
            if weight is None:
                weight = 1.0
            if isinstance(weight, bool) or not isinstance(weight,
                                                          (int, float)):
                _fail(f"{p}.weight", "must be a number")
            if weight < 0:
                _fail(f"{p}.weight", "must be nonnegative")
            out.append(cls(stage, position, float(weight)))
        else:
            out.append(cls(stage, position))
    return out


def _parse_obstacles(doc, lenient):
    entries = doc.get("obstacles", [])
    if entries is None:
        entries = []
    if not isinstance(entries, list):
        _fail("obstacles", "must be a list")
    out = []
    for idx, entry in enumerate(entries):
        p = f"obstacles[{idx}]"
        _require_mapping(entry, p)
        _check_unknown(entry, {"center", "radius", "margin"}, p, lenient)
        out.append(Obstacle(
            center=_get_vec3(entry, "center", f"{p}."),
            radius=_get_number(entry, "radius", f"{p}.",
                               strictly_positive=True),
            margin=_get_number(entry, "margin", f"{p}.",
                               default=DEFAULT_OBSTACLE_MARGIN, minimum=0.0),
        ))
    return out


def _parse_gimbal_limits(doc, lenient):
    if "gimbal_limits" not in doc or doc["gimbal_limits"] is None:
        return None
    entry = _require_mapping(doc["gimbal_limits"], "gimbal_limits")
    known = {"yaw_range", "pitch_range", "yaw_rate_range", "pitch_rate_range"}
    _check_unknown(entry, known, "gimbal_limits", lenient)
    return GimbalLimits(
        yaw_range=_get_range(entry, "yaw_range", "gimbal_limits.",
                             (-2.8, 2.8)),
        pitch_range=_get_range(entry, "pitch_range", "gimbal_limits.",
                               (-1.55, 0.6)),
        yaw_rate_range=_get_range(entry, "yaw_rate_range", "gimbal_limits.",
                                  (-3.0, 3.0)),
        pitch_rate_range=_get_range(entry, "pitch_rate_range",
                                    "gimbal_limits.", (-3.0, 3.0)),
    )


def _parse_weights(doc, lenient):
    entry = doc.get("weights", {})
    if entry is None:
        entry = {}
    _require_mapping(entry, "weights")
    _check_unknown(entry, set(_WEIGHT_NAMES), "weights", lenient)
    defaults = CostWeights()
    values = {}
    for name in _WEIGHT_NAMES:
        values[name] = _get_number(entry, name, "weights.",
                                   default=getattr(defaults, name),
                                   minimum=0.0)
    return CostWeights(**values)


def _parse_orders(doc, lenient):
    entry = doc.get("derivative_orders", {})
    if entry is None:
        entry = {}
    _require_mapping(entry, "derivative_orders")
    _check_unknown(entry, {"quad", "target", "gimbal"}, "derivative_orders",
                   lenient)
    quad = _get_int(entry, "quad", "derivative_orders.", default=4,
                    minimum=1)
    target = _get_int(entry, "target", "derivative_orders.", default=3,
                      minimum=1)
    gimbal = _get_int(entry, "gimbal", "derivative_orders.", default=3,
                      minimum=1)
    for name, v in (("quad", quad), ("target", target), ("gimbal", gimbal)):
        if v > 4:
            _fail(f"derivative_orders.{name}", "must be <= 4")
    return quad, target, gimbal


def _parse_solver(doc, lenient):
    entry = doc.get("solver", {})
    if entry is None:
        entry = {}
    _require_mapping(entry, "solver")
    _check_unknown(entry, set(_SOLVER_FIELDS), "solver", lenient)
    kwargs = {}
    for name, default in _SOLVER_FIELDS.items():
        if name == "polish":
            v = entry.get(name, default)
            if not isinstance(v, bool):
                _fail("solver.polish", "must be a boolean")
            kwargs[name] = v
        elif name in ("max_iter", "adaptive_rho_interval", "check_interval",
                      "scaling_iters"):
            kwargs[name] = _get_int(entry, name, "solver.", default=default,
                                    minimum=0 if name == "scaling_iters"
                                    else 1)
        else:
            kwargs[name] = _get_number(entry, name, "solver.",
                                       default=default,
                                       strictly_positive=True)
    return QPSettings(**kwargs)


def _parse_iqp(doc, lenient):
    entry = doc.get("iqp", {})
    if entry is None:
        entry = {}
    _require_mapping(entry, "iqp")
    _check_unknown(entry, set(_IQP_FIELDS), "iqp", lenient)
    backtrack = _get_number(entry, "backtrack", "iqp.", default=0.5)
    if not 0.0 < backtrack < 1.0:
        _fail("iqp.backtrack", "must lie strictly between 0 and 1")
    return IqpSettings(
        max_iterations=_get_int(entry, "max_iterations", "iqp.", default=50,
                                minimum=1),
        relative_decrease=_get_number(entry, "relative_decrease", "iqp.",
                                      default=1e-4, strictly_positive=True),
        alpha_min=_get_number(entry, "alpha_min", "iqp.", default=1e-4,
                              strictly_positive=True),
        backtrack=backtrack,
    )


def _parse_gains(doc, platform, lenient):
    entry = doc.get("gains", {})
    if entry is None:
        entry = {}
    _require_mapping(entry, "gains")
    _check_unknown(entry, {"position", "velocity", "attitude", "rate"},
                   "gains", lenient)
    defaults = ControllerGains.defaults(platform)
    try:
        return ControllerGains(
            position=_get_vec3(entry, "position", "gains.",
                               default=defaults.position),
            velocity=_get_vec3(entry, "velocity", "gains.",
                               default=defaults.velocity),
            attitude=_get_vec3(entry, "attitude", "gains.",
                               default=defaults.attitude),
            rate=_get_vec3(entry, "rate", "gains.", default=defaults.rate),
        )
    except ValueError as exc:
        _fail("gains", str(exc))


_TOP_LEVEL_FIELDS = {
    "version", "platform", "beta", "dt", "horizon", "keyframes",
    "keytargets", "target_half_height", "obstacles", "gimbal_limits",
    "weights", "derivative_orders", "solver", "iqp", "gains",
}


def project_from_document(doc: dict, lenient: bool = False) -> Project:
    """Validate a parsed JSON document into a Project."""
    _require_mapping(doc, "document")
    _check_unknown(doc, _TOP_LEVEL_FIELDS, "", lenient)
    version = doc.get("version", 1)
    if version != 1:
        _fail("version", f"unsupported version {version!r}")

    platform = _parse_platform(doc, lenient)
    beta = _get_number(doc, "beta", "", default=DEFAULT_BETA, minimum=0.0)
    if beta > 1.0:
        _fail("beta", "must lie in [0, 1]")
    dt = _get_number(doc, "dt", "", default=0.1, strictly_positive=True)

    raw_keyframes = doc.get("keyframes", [])
    if not isinstance(raw_keyframes, list) or len(raw_keyframes) < 2:
        _fail("keyframes", "need at least 2 keyframes")
    stages = [k.get("stage") if isinstance(k, dict) else None
              for k in raw_keyframes]
    if any(not isinstance(s, int) or isinstance(s, bool) for s in stages):
        _fail("keyframes", "every keyframe needs an integer stage")
    default_horizon = max(stages) * dt
    horizon = _get_number(doc, "horizon", "", default=default_horizon,
                          strictly_positive=True)
    steps = horizon / dt
    if abs(steps - round(steps)) > 1e-6 * max(1.0, steps):
        _fail("horizon", "must be an integer multiple of dt")
    num_stages = int(round(steps)) + 1
    if num_stages < 2:
        _fail("horizon", "needs at least 2 stages (horizon >= dt)")

    keyframes = _parse_anchors(doc, "keyframes", num_stages, Keyframe,
                               "keyframes", lenient, with_weight=True)
    keytargets = _parse_anchors(doc, "keytargets", num_stages, KeyTarget,
                                "keytargets", lenient)
    target_half_height = _get_number(doc, "target_half_height", "",
                                     default=0.5, minimum=0.0)
    obstacles = _parse_obstacles(doc, lenient)
    gimbal_limits = _parse_gimbal_limits(doc, lenient)
    weights = _parse_weights(doc, lenient)
    quad_order, target_order, gimbal_order = _parse_orders(doc, lenient)

    if weights.lambda_d > 0 and num_stages <= quad_order:
        _fail("horizon", f"too short for derivative order {quad_order}")
    try:
        derive_input_bounds(platform, beta)
    except ValueError as exc:
        _fail("beta", str(exc))

    return Project(
        platform=platform,
        beta=beta,
        dt=dt,
        horizon=horizon,
        keyframes=keyframes,
        keytargets=keytargets,
        target_half_height=target_half_height,
        obstacles=obstacles,
        gimbal_limits=gimbal_limits,
        weights=weights,
        quad_derivative_order=quad_order,
        target_derivative_order=target_order,
        gimbal_derivative_order=gimbal_order,
        solver_settings=_parse_solver(doc, lenient),
        iqp_settings=_parse_iqp(doc, lenient),
        gains=_parse_gains(doc, platform, lenient),
    )


def platform_from_document(doc: dict, lenient: bool = False) -> PlatformParams:
    """Validate a bare {"platform": {...}} fragment."""
    return _parse_platform({"platform": doc}, lenient)


def gains_from_document(doc: dict | None, platform: PlatformParams,
                        lenient: bool = False) -> ControllerGains:
    """Validate a gains fragment, defaulting from the platform."""
    return _parse_gains({"gains": doc or {}}, platform, lenient)


def load_project(source, lenient: bool = False) -> Project:
    """Load a project from a path, bytes, or a readable stream."""
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            raw = fh.read()
    elif isinstance(source, bytes):
        raw = source
    elif hasattr(source, "read"):
        raw = source.read()
        if isinstance(raw, str):
            raw = raw.encode()
    else:
        raise TypeError("source must be a path, bytes, or stream")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ProjectError(("document", f"invalid JSON: {exc}")) from exc
    return project_from_document(doc, lenient=lenient)


def to_document(project: Project) -> dict:
    """Fully materialized document; saving and reloading is the identity."""
    gl = project.gimbal_limits
    return {
        "version": 1,
        "platform": {
            "mass": project.platform.mass,
            "inertia": np.diag(project.platform.inertia_body).tolist(),
            "rotor_thrust_coeff": project.platform.rotor_thrust_coeff,
            "rotor_moment_coeff": project.platform.rotor_moment_coeff,
            "arm_length": project.platform.arm_length,
            "rotor_force_max": project.platform.rotor_force_max,
            "rotor_moment_max": project.platform.rotor_moment_max,
            "gravity": project.platform.gravity,
        },
        "beta": project.beta,
        "dt": project.dt,
        "horizon": project.horizon,
        "keyframes": [
            {"stage": k.stage_index, "position": k.position.tolist(),
             "weight": 1.0 if k.weight_override is None
             else k.weight_override}
            for k in project.keyframes
        ],
        "keytargets": [
            {"stage": k.stage_index, "position": k.position.tolist()}
            for k in project.keytargets
        ],
        "target_half_height": project.target_half_height,
        "obstacles": [
            {"center": o.center.tolist(), "radius": o.radius,
             "margin": o.margin}
            for o in project.obstacles
        ],
        "gimbal_limits": None if gl is None else {
            "yaw_range": list(gl.yaw_range),
            "pitch_range": list(gl.pitch_range),
            "yaw_rate_range": list(gl.yaw_rate_range),
            "pitch_rate_range": list(gl.pitch_rate_range),
        },
        "weights": {name: getattr(project.weights, name)
                    for name in _WEIGHT_NAMES},
        "derivative_orders": {
            "quad": project.quad_derivative_order,
            "target": project.target_derivative_order,
            "gimbal": project.gimbal_derivative_order,
        },
        "solver": {name: getattr(project.solver_settings, name)
                   for name in _SOLVER_FIELDS},
        "iqp": {name: getattr(project.iqp_settings, name)
                for name in _IQP_FIELDS},
        "gains": {
            "position": project.gains.position.tolist(),
            "velocity": project.gains.velocity.tolist(),
            "attitude": project.gains.attitude.tolist(),
            "rate": project.gains.rate.tolist(),
        },
    }


def save_project(project: Project, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_document(project), fh, indent=2, sort_keys=True)
        fh.write("\n")


def export_trajectory(trajectory: Trajectory, path) -> None:
    """CSV export, one row per stage, 9 decimal places."""
    times = trajectory.times()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(TRAJECTORY_COLUMNS) + "\n")
        for i in range(trajectory.num_stages):
            row = [
                times[i],
                *trajectory.positions[i], trajectory.yaws[i],
                *trajectory.velocities[i], trajectory.yaw_rates[i],
                *trajectory.forces[i], trajectory.yaw_moments[i],
                *trajectory.gimbal_angles[i],
                *trajectory.targets[i],
            ]
            fh.write(",".join(f"{v:.9f}" for v in row) + "\n")


def import_trajectory(path) -> Trajectory:
    """Re-read an exported trajectory CSV."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    header = Path(path).read_text(encoding="utf-8").splitlines()[0]
    if header.split(",") != TRAJECTORY_COLUMNS:
        raise ValueError(f"unexpected trajectory header: {header!r}")
    if data.shape[0] < 2:
        raise ValueError("trajectory must have at least 2 stages")
    times = data[:, 0]
    steps = np.diff(times)
    dt = float(steps[0])
    if np.max(np.abs(steps - dt)) > 1e-6:
        raise ValueError("trajectory time column is not uniformly spaced")
    n = data.shape[0]
    gimbal_angles = data[:, 13:15]
    gimbal_rates = np.zeros((n, 2))
    gimbal_rates[:-1] = np.diff(gimbal_angles, axis=0) / dt
    gimbal_rates[-1] = gimbal_rates[-2]
    return Trajectory(
        dt=dt,
        positions=data[:, 1:4],
        yaws=data[:, 4],
        velocities=data[:, 5:8],
        yaw_rates=data[:, 8],
        forces=data[:, 9:12],
        yaw_moments=data[:, 12],
        gimbal_angles=gimbal_angles,
        gimbal_rates=gimbal_rates,
        targets=data[:, 15:18],
    )


def export_simlog(log: SimLog, path) -> None:
    yaws = log.yaws()
    errors = log.position_errors()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(SIMLOG_COLUMNS) + "\n")
        for i in range(log.num_samples):
            cmd = log.commanded[min(i, log.commanded.shape[0] - 1)] \
                if log.commanded.shape[0] else np.zeros(4)
            row = [
                log.times[i], *log.positions[i], *log.velocities[i],
                yaws[i], *log.body_rates[i], *cmd,
                *log.ref_positions[i], errors[i],
            ]
            fh.write(",".join(f"{v:.9f}" for v in row) + "\n")


def emit_plots(trajectory: Trajectory, simlog: SimLog | None, out_dir,
               project: Project | None = None) -> list[str]:
    """Write path, input, and tracking plots as SVG files."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    created = []

    def path_plot(name, xi, yi, labels):
        fig, ax = plt.subplots(figsize=(6, 6))
        ax.plot(trajectory.positions[:, xi], trajectory.positions[:, yi],
                "-", color="tab:purple", label="path")
        ax.plot(trajectory.targets[:, xi], trajectory.targets[:, yi],
                "--", color="tab:orange", alpha=0.7, label="camera target")
        if project is not None:
            kf = np.array([k.position for k in project.keyframes])
            ax.plot(kf[:, xi], kf[:, yi], "o", color="tab:red",
                    label="keyframes")
            if project.keytargets:
                kt = np.array([k.position for k in project.keytargets])
                ax.plot(kt[:, xi], kt[:, yi], "s", color="tab:olive",
                        label="keytargets")
            for obstacle in project.obstacles:
                circle = plt.Circle(
                    (obstacle.center[xi], obstacle.center[yi]),
                    obstacle.radius, color="tab:gray", alpha=0.5)
                ax.add_patch(circle)
                ring = plt.Circle(
                    (obstacle.center[xi], obstacle.center[yi]),
                    obstacle.keepout, color="tab:gray", alpha=0.25,
                    fill=False, linestyle=":")
                ax.add_patch(ring)
        ax.set_xlabel(f"{labels[0]} [m]")
        ax.set_ylabel(f"{labels[1]} [m]")
        ax.set_aspect("equal", adjustable="datalim")
        ax.legend(loc="best", fontsize=8)
        ax.grid(True, alpha=0.3)
        out = out_dir / name
        fig.savefig(out, format="svg", bbox_inches="tight")
        plt.close(fig)
        created.append(str(out))

    path_plot("path_topdown.svg", 0, 1, ("x", "y"))
    path_plot("path_side.svg", 0, 2, ("x", "z"))

    fig, axes = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    times = trajectory.times()
    for k, label in enumerate(("Fx", "Fy", "Fz")):
        axes[0].plot(times, trajectory.forces[:, k], label=label)
    if project is not None:
        bounds = project.input_bounds()
        lo, hi = bounds.force_box_low(), bounds.force_box_high()
        for k in range(3):
            axes[0].axhline(hi[k], color="k", linestyle=":", linewidth=0.8)
            axes[0].axhline(lo[k], color="k", linestyle=":", linewidth=0.8)
        axes[1].axhline(bounds.yaw_moment_max, color="k", linestyle=":",
                        linewidth=0.8)
        axes[1].axhline(-bounds.yaw_moment_max, color="k", linestyle=":",
                        linewidth=0.8)
    axes[0].set_ylabel("force [N]")
    axes[0].legend(loc="best", fontsize=8)
    axes[0].grid(True, alpha=0.3)
    axes[1].plot(times, trajectory.yaw_moments, color="tab:green",
                 label="M_yaw")
    axes[1].set_ylabel("yaw moment [N m]")
    axes[1].set_xlabel("t [s]")
    axes[1].legend(loc="best", fontsize=8)
    axes[1].grid(True, alpha=0.3)
    out = out_dir / "inputs.svg"
    fig.savefig(out, format="svg", bbox_inches="tight")
    plt.close(fig)
    created.append(str(out))

    if simlog is not None and simlog.num_samples:
        fig, ax = plt.subplots(figsize=(8, 4))
        ax.plot(simlog.times, simlog.position_errors(), color="tab:blue")
        ax.set_xlabel("t [s]")
        ax.set_ylabel("position error [m]")
        ax.grid(True, alpha=0.3)
        out = out_dir / "tracking_error.svg"
        fig.savefig(out, format="svg", bbox_inches="tight")
        plt.close(fig)
        created.append(str(out))
    return created
