"""Trajectory planning: problem assembly, pure QP path, and the IQP loop.

A planning problem couples the stacked stage variables of `costs` with the
discretized dynamics of `dynamics`:

  * equality rows: the quad's ZOH dynamics and the gimbal integrator chain
    at every transition, a hard pin on the initial flat state, and a mirror
    of the final stage's inputs onto the previous stage (the last input
    drives no transition, so mirroring keeps the program nonsingular
    without restricting the reachable states);
  * inequality rows: the force box and yaw-moment bound per stage, gimbal
    angle/rate boxes when limits are configured, and one linearized
    half-space per obstacle per stage;
  * objective: the assembled quadratic model from `costs.total_cost`.

Quadratic-only objectives solve in one shot (`plan_linear`). Nonlinear
objectives and obstacle constraints go through `plan_iqp`: rebuild the
quadratic model around the current iterate, solve, then backtrack along
the step until the true cost decreases. Because the sphere constraint
linearization is conservative (the half-space lies inside the free space),
any point satisfying the linear rows also clears the true obstacle.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import costs
from .costs import StackedVariables
from .dynamics import (
    DiscreteDynamics,
    InputBounds,
    PlatformParams,
    derive_input_bounds,
    discretize,
)
from .qpsolver import QPSettings, QPSolution, SparseQP, solve

_OBSTACLE_CENTER_EPS = 1e-9
DEFAULT_OBSTACLE_MARGIN = 0.2


def _inf_norm(v: np.ndarray) -> float:
    return float(np.max(np.abs(v))) if v.size else 0.0


@dataclass(frozen=True)
class Obstacle:
    """A static sphere to keep clear of, inflated by a safety margin."""

    center: np.ndarray
    radius: float
    margin: float = DEFAULT_OBSTACLE_MARGIN

    def __post_init__(self):
        object.__setattr__(self, "center",
                           np.asarray(self.center, dtype=float))
        if self.center.shape != (3,):
            raise ValueError("obstacle center must be a 3-vector")
        if not self.radius > 0:
            raise ValueError("obstacle radius must be positive")
        if self.margin < 0:
            raise ValueError("obstacle margin must be nonnegative")

    @property
    def keepout(self) -> float:
        return self.radius + self.margin


@dataclass(frozen=True)
class IqpSettings:
    max_iterations: int = 50
    relative_decrease: float = 1e-4
    alpha_min: float = 1e-4
    backtrack: float = 0.5
    # proximal damping, Levenberg style: raised when the line search has to
    # backtrack, lowered after clean full steps; zero keeps the exact-model
    # case a single-step solve
    damping_initial: float = 2.0
    damping_grow: float = 4.0
    damping_shrink: float = 0.25
    # subproblem primal tolerance; accepted iterates are convex combinations
    # of subproblem solutions, so their constraint residuals stay within
    # this bound, safely inside the 1e-5 feasibility tolerance
    subproblem_eps: float = 3e-6
    subproblem_max_iter: int = 3000


@dataclass
class Trajectory:
    """A planned motion: per-stage states, inputs and camera variables."""

    dt: float
    positions: np.ndarray
    yaws: np.ndarray
    velocities: np.ndarray
    yaw_rates: np.ndarray
    forces: np.ndarray
    yaw_moments: np.ndarray
    gimbal_angles: np.ndarray
    gimbal_rates: np.ndarray
    targets: np.ndarray

    @property
    def num_stages(self) -> int:
        return self.positions.shape[0]

    @property
    def duration(self) -> float:
        return (self.num_stages - 1) * self.dt

    def times(self) -> np.ndarray:
        return np.arange(self.num_stages) * self.dt

    def bounding_box_diagonal(self) -> float:
        span = self.positions.max(axis=0) - self.positions.min(axis=0)
        return float(np.linalg.norm(span))

    @classmethod
    def from_stacked(cls, x: StackedVariables) -> "Trajectory":
        return cls(
            dt=x.dt,
            positions=x.quad_positions().copy(),
            yaws=x.quad_yaws().copy(),
            velocities=x.quad_velocities().copy(),
            yaw_rates=x.quad_yaw_rates().copy(),
            forces=x.forces().copy(),
            yaw_moments=x.yaw_moments().copy(),
            gimbal_angles=x.gimbal_angles().copy(),
            gimbal_rates=x.gimbal_rates().copy(),
            targets=x.targets().copy(),
        )

    def to_stacked(self) -> StackedVariables:
        n = self.num_stages
        x = StackedVariables.zeros(n, self.dt)
        by = x.by_stage()
        by[:, costs.QUAD_POS_OFF:costs.QUAD_POS_OFF + 3] = self.positions
        by[:, costs.QUAD_YAW_OFF] = self.yaws
        by[:, costs.QUAD_VEL_OFF:costs.QUAD_VEL_OFF + 3] = self.velocities
        by[:, costs.QUAD_YAW_RATE_OFF] = self.yaw_rates
        by[:, costs.FORCE_OFF:costs.FORCE_OFF + 3] = self.forces
        by[:, costs.YAW_MOMENT_OFF] = self.yaw_moments
        by[:, costs.GIMBAL_ANGLE_OFF:costs.GIMBAL_ANGLE_OFF + 2] = \
            self.gimbal_angles
        by[:, costs.GIMBAL_RATE_OFF:costs.GIMBAL_RATE_OFF + 2] = \
            self.gimbal_rates
        by[:, costs.TARGET_OFF:costs.TARGET_OFF + 3] = self.targets
        return x


@dataclass
class IqpIterate:
    iteration: int
    cost: float
    alpha: float | None
    max_violation: float


@dataclass
class IqpReport:
    iterates: list[IqpIterate]
    termination: str
    wall_time: float

    def costs(self) -> list[float]:
        return [it.cost for it in self.iterates]

    def to_dict(self) -> dict:
        return {
            "termination": self.termination,
            "wall_time": self.wall_time,
            "iterates": [
                {"iteration": it.iteration, "cost": it.cost,
                 "alpha": it.alpha, "max_violation": it.max_violation}
                for it in self.iterates
            ],
        }


@dataclass
class FeasibilityReport:
    """Per-stage constraint diagnostics plus an overall verdict.

    Violations are magnitudes (0 when satisfied); obstacle_clearances hold
    the signed distance beyond each sphere's keepout radius, minimized over
    obstacles (+inf when there are none).
    """

    eps_eq: float
    eps_ineq: float
    dynamics_residuals: np.ndarray      # (N-1,) inf-norm per transition
    input_violations: np.ndarray        # (N,)
    gimbal_violations: np.ndarray       # (N,)
    obstacle_clearances: np.ndarray     # (N,)
    feasible: bool

    @property
    def max_dynamics_residual(self) -> float:
        return float(self.dynamics_residuals.max()) \
            if self.dynamics_residuals.size else 0.0

    @property
    def max_input_violation(self) -> float:
        return float(self.input_violations.max())

    @property
    def max_gimbal_violation(self) -> float:
        return float(self.gimbal_violations.max())

    @property
    def min_obstacle_clearance(self) -> float:
        return float(self.obstacle_clearances.min())

    @property
    def max_violation(self) -> float:
        obstacle_viol = max(0.0, -self.min_obstacle_clearance) \
            if np.isfinite(self.min_obstacle_clearance) else 0.0
        return max(self.max_dynamics_residual, self.max_input_violation,
                   self.max_gimbal_violation, obstacle_viol)

    def to_dict(self) -> dict:
        return {
            "feasible": bool(self.feasible),
            "eps_eq": self.eps_eq,
            "eps_ineq": self.eps_ineq,
            "max_dynamics_residual": self.max_dynamics_residual,
            "max_input_violation": self.max_input_violation,
            "max_gimbal_violation": self.max_gimbal_violation,
            "min_obstacle_clearance":
                None if not np.isfinite(self.min_obstacle_clearance)
                else self.min_obstacle_clearance,
            "worst_dynamics_stage":
                int(np.argmax(self.dynamics_residuals))
                if self.dynamics_residuals.size else None,
            "worst_input_stage": int(np.argmax(self.input_violations)),
            "dynamics_residuals": self.dynamics_residuals.tolist(),
            "input_violations": self.input_violations.tolist(),
            "gimbal_violations": self.gimbal_violations.tolist(),
            "obstacle_clearances": [
                None if not np.isfinite(c) else c
                for c in self.obstacle_clearances.tolist()],
        }


def _interp_anchors(num_stages: int, anchors) -> np.ndarray:
    """Piecewise-linear interpolation of (stage, position) anchors.

    Stages before the first anchor and after the last hold that anchor's
    position.
    """
    stages = np.array([a.stage_index for a in anchors], dtype=float)
    values = np.array([a.position for a in anchors], dtype=float)
    out = np.empty((num_stages, 3))
    grid = np.arange(num_stages, dtype=float)
    for k in range(3):
        out[:, k] = np.interp(grid, stages, values[:, k])
    return out


def _wrap_angle(a: float) -> float:
    return float(np.arctan2(np.sin(a), np.cos(a)))


def _clear_of_obstacles(positions: np.ndarray, obstacles,
                        clearance: float = 1e-3) -> np.ndarray:
    """Push stages radially out of every keepout sphere.

    With a starting point outside the obstacles, the conservative
    linearization keeps every later iterate outside too, so the line search
    never has to trade cost against collision.
    """
    out = positions.copy()
    for _ in range(4):  # a few passes settle overlapping spheres
        moved = False
        for obstacle in obstacles:
            offset = out - obstacle.center
            dist = np.linalg.norm(offset, axis=1)
            required = obstacle.keepout + clearance
            inside = dist < required
            if not np.any(inside):
                continue
            moved = True
            for i in np.nonzero(inside)[0]:
                if dist[i] < _OBSTACLE_CENTER_EPS:
                    direction = np.array([0.0, 0.0, 1.0])
                else:
                    direction = offset[i] / dist[i]
                out[i] = obstacle.center + required * direction
        if not moved:
            break
    return out


def initial_guess(project) -> StackedVariables:
    """Dynamics-consistent starting trajectory from the project anchors.

    Positions follow the keyframe interpolation (projected out of obstacle
    keepout spheres), the initial velocity is zero, and the remaining
    velocities and forces are reconstructed from the discrete dynamics, so
    every equality row of `build_problem` holds exactly at the guess.
    Pinning both the positions and a resting start makes the velocity
    sequence alternate around the segment slope; the first QP solve smooths
    it and restores the input boxes, which the guess may violate at
    keyframe corners.
    """
    keyframes = sorted(project.keyframes, key=lambda k: k.stage_index)
    if len(keyframes) < 2:
        raise ValueError("need at least 2 keyframes to plan")
    n = project.num_stages
    dt = project.dt
    params = project.platform
    x = StackedVariables.zeros(n, dt)
    by = x.by_stage()

    positions = _clear_of_obstacles(_interp_anchors(n, keyframes),
                                    project.obstacles)

    # exact reconstruction: the position row of the ZOH dynamics determines
    # F_i from (r_i, r_{i+1}, v_i), and the velocity row then yields
    # v_{i+1} = 2 (r_{i+1} - r_i)/dt - v_i
    grav = np.array([0.0, 0.0, params.mass * params.gravity])
    vel = np.zeros((n, 3))
    forces = np.empty((n, 3))
    for i in range(n - 1):
        delta = positions[i + 1] - positions[i]
        forces[i] = 2.0 * params.mass / dt ** 2 * (delta - dt * vel[i]) + grav
        vel[i + 1] = 2.0 * delta / dt - vel[i]
    forces[-1] = forces[-2]

    by[:, costs.QUAD_POS_OFF:costs.QUAD_POS_OFF + 3] = positions
    by[:, costs.QUAD_VEL_OFF:costs.QUAD_VEL_OFF + 3] = vel
    by[:, costs.FORCE_OFF:costs.FORCE_OFF + 3] = forces

    # camera targets: interpolate keytargets, else look ahead along +x
    keytargets = sorted(project.keytargets, key=lambda k: k.stage_index)
    if keytargets:
        targets = _interp_anchors(n, keytargets)
    else:
        targets = positions + np.array([1.0, 0.0, 0.0])
    by[:, costs.TARGET_OFF:costs.TARGET_OFF + 3] = targets

    # gimbal: point the camera at the target (quad yaw starts at zero)
    angles = np.zeros((n, 2))
    for i in range(n):
        p_d = targets[i] - positions[i]
        horizontal = float(np.hypot(p_d[0], p_d[1]))
        if np.linalg.norm(p_d) < 1e-9:
            angles[i] = angles[i - 1] if i else 0.0
            continue
        angles[i, 0] = _wrap_angle(np.arctan2(p_d[1], p_d[0]))
        angles[i, 1] = np.arctan2(p_d[2], horizontal)
    angles[:, 0] = np.unwrap(angles[:, 0])
    limits = project.gimbal_limits
    if limits is not None:
        angles[:, 0] = np.clip(angles[:, 0], *limits.yaw_range)
        angles[:, 1] = np.clip(angles[:, 1], *limits.pitch_range)
    rates = np.zeros((n, 2))
    rates[:-1] = np.diff(angles, axis=0) / dt
    rates[-1] = rates[-2]
    by[:, costs.GIMBAL_ANGLE_OFF:costs.GIMBAL_ANGLE_OFF + 2] = angles
    by[:, costs.GIMBAL_RATE_OFF:costs.GIMBAL_RATE_OFF + 2] = rates
    return x


def linearize_obstacle(obstacle: Obstacle, position,
                       fallback_direction=None):
    """Half-space row keeping a stage outside a sphere, linearized at
    `position`.

    Returns (row, rhs, direction) with the constraint in row . r <= rhs
    form. The half-space is tangent to the keepout sphere along the
    direction from the center to `position`, so it is conservative: any
    point satisfying it truly clears the sphere. A stage sitting on the
    center has no gradient; the caller's previous direction (or +z) is
    used instead.
    """
    position = np.asarray(position, dtype=float)
    offset = position - obstacle.center
    dist = float(np.linalg.norm(offset))
    if dist < _OBSTACLE_CENTER_EPS:
        direction = np.array([0.0, 0.0, 1.0]) if fallback_direction is None \
            else np.asarray(fallback_direction, dtype=float)
    else:
        direction = offset / dist
    rhs = -(obstacle.keepout + float(direction @ obstacle.center))
    return -direction, rhs, direction


def _dynamics_equalities(num_stages: int, discrete: DiscreteDynamics,
                         pin_state: np.ndarray):
    """Equality rows: quad ZOH chain, gimbal integrator chain, initial pin,
    terminal input mirrors."""
    rows, cols, vals, rhs = [], [], [], []
    r = 0
    a_d, b_d, c_d = discrete.a_mat, discrete.b_mat, discrete.c_vec
    dt = discrete.dt
    for i in range(num_stages - 1):
        x_i = costs.flat_state_slice(i).start
        u_i = costs.flat_input_slice(i).start
        x_n = costs.flat_state_slice(i + 1).start
        for j in range(8):
            rows.append(r)
            cols.append(x_n + j)
            vals.append(1.0)
            for k in range(8):
                if a_d[j, k] != 0.0:
                    rows.append(r)
                    cols.append(x_i + k)
                    vals.append(-a_d[j, k])
            for k in range(4):
                if b_d[j, k] != 0.0:
                    rows.append(r)
                    cols.append(u_i + k)
                    vals.append(-b_d[j, k])
            rhs.append(c_d[j])
            r += 1
    for i in range(num_stages - 1):
        ang_i = costs.gimbal_angle_slice(i).start
        rate_i = costs.gimbal_rate_slice(i).start
        ang_n = costs.gimbal_angle_slice(i + 1).start
        for j in range(2):
            rows.extend([r, r, r])
            cols.extend([ang_n + j, ang_i + j, rate_i + j])
            vals.extend([1.0, -1.0, -dt])
            rhs.append(0.0)
            r += 1
    # initial flat state pin
    x0 = costs.flat_state_slice(0).start
    for j in range(8):
        rows.append(r)
        cols.append(x0 + j)
        vals.append(1.0)
        rhs.append(pin_state[j])
        r += 1
    # terminal input mirrors: the last stage's inputs drive no transition
    last_u = costs.flat_input_slice(num_stages - 1).start
    prev_u = costs.flat_input_slice(num_stages - 2).start
    for j in range(4):
        rows.extend([r, r])
        cols.extend([last_u + j, prev_u + j])
        vals.extend([1.0, -1.0])
        rhs.append(0.0)
        r += 1
    last_g = costs.gimbal_rate_slice(num_stages - 1).start
    prev_g = costs.gimbal_rate_slice(num_stages - 2).start
    for j in range(2):
        rows.extend([r, r])
        cols.extend([last_g + j, prev_g + j])
        vals.extend([1.0, -1.0])
        rhs.append(0.0)
        r += 1
    return rows, cols, vals, rhs, r


def _bound_inequalities(num_stages: int, bounds: InputBounds, gimbal_limits):
    rows, cols, vals, rhs = [], [], [], []
    r = 0
    lo = bounds.force_box_low()
    hi = bounds.force_box_high()
    for i in range(num_stages):
        f = costs.force_slice(i).start
        for j in range(3):
            rows.append(r)
            cols.append(f + j)
            vals.append(1.0)
            rhs.append(hi[j])
            r += 1
            rows.append(r)
            cols.append(f + j)
            vals.append(-1.0)
            rhs.append(-lo[j])
            r += 1
        m = costs.yaw_moment_index(i)
        rows.append(r)
        cols.append(m)
        vals.append(1.0)
        rhs.append(bounds.yaw_moment_max)
        r += 1
        rows.append(r)
        cols.append(m)
        vals.append(-1.0)
        rhs.append(bounds.yaw_moment_max)
        r += 1
    if gimbal_limits is not None:
        boxes = [
            (costs.GIMBAL_ANGLE_OFF, gimbal_limits.yaw_range),
            (costs.GIMBAL_ANGLE_OFF + 1, gimbal_limits.pitch_range),
            (costs.GIMBAL_RATE_OFF, gimbal_limits.yaw_rate_range),
            (costs.GIMBAL_RATE_OFF + 1, gimbal_limits.pitch_rate_range),
        ]
        for i in range(num_stages):
            base = costs.stage_base(i)
            for off, (lo_v, hi_v) in boxes:
                rows.append(r)
                cols.append(base + off)
                vals.append(1.0)
                rhs.append(hi_v)
                r += 1
                rows.append(r)
                cols.append(base + off)
                vals.append(-1.0)
                rhs.append(-lo_v)
                r += 1
    return rows, cols, vals, rhs, r


def _obstacle_inequalities(x_ref: StackedVariables, obstacles, row_start: int):
    rows, cols, vals, rhs = [], [], [], []
    r = row_start
    positions = x_ref.quad_positions()
    for obstacle in obstacles:
        direction = None
        for i in range(x_ref.num_stages):
            row, b, direction = linearize_obstacle(obstacle, positions[i],
                                                   direction)
            p = costs.quad_position_slice(i).start
            for j in range(3):
                rows.append(r)
                cols.append(p + j)
                vals.append(row[j])
            rhs.append(b)
            r += 1
    return rows, cols, vals, rhs, r


def build_problem(project, x_ref: StackedVariables) -> SparseQP:
    """Assemble the QP around x_ref: dynamics equalities, bound and
    obstacle inequalities, and the quadratic cost model."""
    n_stages = project.num_stages
    if x_ref.num_stages != n_stages:
        raise ValueError("reference stage count does not match project")
    n = x_ref.size
    discrete = discretize(project.platform, project.dt)
    bounds = project.input_bounds()
    pin_state = x_ref.values[costs.flat_state_slice(0)]

    eq = _dynamics_equalities(n_stages, discrete, pin_state)
    eq_mat = sp.coo_matrix((eq[2], (eq[0], eq[1])), shape=(eq[4], n)).tocsc()
    eq_rhs = np.asarray(eq[3])

    ineq = _bound_inequalities(n_stages, bounds, project.gimbal_limits)
    obs = _obstacle_inequalities(x_ref, project.obstacles, ineq[4])
    all_rows = ineq[0] + obs[0]
    all_cols = ineq[1] + obs[1]
    all_vals = ineq[2] + obs[2]
    all_rhs = np.asarray(ineq[3] + obs[3])
    ineq_mat = sp.coo_matrix((all_vals, (all_rows, all_cols)),
                             shape=(obs[4], n)).tocsc()

    total = costs.total_cost(
        x_ref, project.weights, project.keyframes, project.keytargets,
        target_half_height=project.target_half_height,
        quad_derivative_order=project.quad_derivative_order,
        target_derivative_order=project.target_derivative_order,
        gimbal_derivative_order=project.gimbal_derivative_order)
    return SparseQP(total.model.hessian, total.model.linear,
                    eq_mat, eq_rhs, ineq_mat, all_rhs)


def _true_cost(project, x: StackedVariables) -> float:
    return costs.total_cost(
        x, project.weights, project.keyframes, project.keytargets,
        target_half_height=project.target_half_height,
        quad_derivative_order=project.quad_derivative_order,
        target_derivative_order=project.target_derivative_order,
        gimbal_derivative_order=project.gimbal_derivative_order).value


def _solver_settings(project, initial_x=None) -> QPSettings:
    base = project.solver_settings
    return QPSettings(**{
        **base.__dict__,
        "early_polish_interval": 250,
        "initial_x": initial_x,
    })


def plan_linear(project) -> tuple[Trajectory, QPSolution]:
    """One-shot QP solve for quadratic-only objectives without obstacles."""
    if project.weights.needs_iqp():
        raise ValueError("nonlinear cost terms require plan_iqp")
    if project.obstacles:
        raise ValueError("obstacle constraints require plan_iqp")
    guess = initial_guess(project)
    qp = build_problem(project, guess)
    solution = solve(qp, _solver_settings(project, guess.values))
    x = guess.with_values(solution.x)
    return Trajectory.from_stacked(x), solution


def _damped(qp: SparseQP, x_ref: np.ndarray, damping: float) -> SparseQP:
    """Add a proximal term damping * ||x - x_ref||^2 to the objective."""
    if damping == 0.0:
        return qp
    n = qp.num_variables
    return SparseQP(
        qp.hessian + 2.0 * damping * sp.eye(n, format="csc"),
        qp.linear - 2.0 * damping * x_ref,
        qp.eq_matrix, qp.eq_rhs, qp.ineq_matrix, qp.ineq_rhs)


def _subproblem_settings(project, initial_x, rho=None) -> QPSettings:
    # tight where it matters: primal residuals bound the feasibility of
    # accepted iterates, stationarity only shapes the step direction
    base = project.solver_settings
    opts = project.iqp_settings
    return QPSettings(**{
        **base.__dict__,
        "eps_abs": max(base.eps_abs, opts.subproblem_eps),
        "eps_rel": 1e-8,
        "eps_dual_abs": 1e-3,
        "eps_dual_rel": 1e-6,
        "max_iter": min(base.max_iter, opts.subproblem_max_iter),
        "check_interval": min(base.check_interval, 10),
        "early_polish_interval": 250,
        "initial_x": initial_x,
        "rho": base.rho if rho is None else rho,
    })


def plan_iqp(project,
             progress: Callable[[IqpIterate], None] | None = None
             ) -> tuple[Trajectory, IqpReport]:
    """Iterated QP with backtracking line search on the true cost.

    Each major iteration rebuilds the quadratic model and the obstacle
    linearization around the current iterate, solves the QP, and walks
    X + alpha dX with alpha halved until the true cost drops. Accepted
    costs are strictly decreasing by construction. A proximal damping term
    grows whenever the model overshoots (line search backtracks) and decays
    after full steps.
    """
    opts: IqpSettings = project.iqp_settings
    t0 = time.perf_counter()
    x = initial_guess(project)
    cost = _true_cost(project, x)
    iterates = [IqpIterate(0, cost, None, _max_violation(project, x))]
    if progress:
        progress(iterates[0])
    termination = "max_iterations"
    damping = 0.0
    any_accepted = False
    warm_duals = None
    warm_rho = None

    for major in range(1, opts.max_iterations + 1):
        qp = _damped(build_problem(project, x), x.values, damping)
        solution = solve(qp,
                         _subproblem_settings(project, x.values, warm_rho),
                         _warm_duals=warm_duals)
        warm_duals = (solution.y_eq, solution.y_ineq)
        warm_rho = solution.rho_final
        dx = solution.x - x.values
        if not np.all(np.isfinite(dx)):
            termination = "solver_failure"
            break
        if _inf_norm(dx) <= 1e-8 * max(1.0, _inf_norm(x.values)):
            termination = "converged"
            break
        alpha = 1.0
        accepted = None
        while alpha >= opts.alpha_min:
            candidate = x.with_values(x.values + alpha * dx)
            candidate_cost = _true_cost(project, candidate)
            if candidate_cost < cost:
                accepted = (candidate, candidate_cost, alpha)
                break
            alpha *= opts.backtrack
        if accepted is None:
            if damping == 0.0 or damping < 64.0 * opts.damping_initial:
                # give the damped model a chance before giving up
                damping = max(damping * opts.damping_grow,
                              opts.damping_initial)
                continue
            termination = "alpha_underflow" if any_accepted else "stalled"
            break
        x, new_cost, alpha = accepted
        any_accepted = True
        if alpha >= 1.0:
            damping *= opts.damping_shrink
            if damping < 1e-3 * opts.damping_initial:
                damping = 0.0
        elif alpha <= 0.25:
            damping = max(damping * opts.damping_grow, opts.damping_initial)
        iterate = IqpIterate(major, new_cost, alpha,
                             _max_violation(project, x))
        iterates.append(iterate)
        if progress:
            progress(iterate)
        relative = (cost - new_cost) / max(abs(cost), 1e-12)
        cost = new_cost
        if relative < opts.relative_decrease:
            termination = "converged"
            break

    if any_accepted:
        # one more major from the terminated point; with warm duals this is
        # cheap and the polish step usually lands machine-precision residuals
        qp = _damped(build_problem(project, x), x.values, damping)
        solution = solve(qp,
                         _subproblem_settings(project, x.values, warm_rho),
                         _warm_duals=warm_duals)
        dx = solution.x - x.values
        if np.all(np.isfinite(dx)):
            alpha = 1.0
            while alpha >= opts.alpha_min:
                candidate = x.with_values(x.values + alpha * dx)
                candidate_cost = _true_cost(project, candidate)
                if candidate_cost < cost:
                    x, cost = candidate, candidate_cost
                    iterate = IqpIterate(len(iterates), cost, alpha,
                                         _max_violation(project, x))
                    iterates.append(iterate)
                    if progress:
                        progress(iterate)
                    break
                alpha *= opts.backtrack

    report = IqpReport(iterates, termination,
                       time.perf_counter() - t0)
    return Trajectory.from_stacked(x), report


def _max_violation(project, x: StackedVariables) -> float:
    report = feasibility_report(
        Trajectory.from_stacked(x), project.platform,
        project.input_bounds(), project.gimbal_limits, project.obstacles)
    return report.max_violation


def feasibility_report(trajectory: Trajectory, platform: PlatformParams,
                       bounds: InputBounds, gimbal_limits=None,
                       obstacles=(), eps_eq: float = 1e-5,
                       eps_ineq: float = 1e-5) -> FeasibilityReport:
    """Re-check a trajectory against dynamics, boxes and obstacles.

    Works from the trajectory data alone, so exported/imported plans can be
    audited without the solver in the loop.
    """
    n = trajectory.num_stages
    discrete = discretize(platform, trajectory.dt)
    x = trajectory.to_stacked()

    dyn = np.zeros(max(n - 1, 0))
    for i in range(n - 1):
        xi = x.values[costs.flat_state_slice(i)]
        ui = x.values[costs.flat_input_slice(i)]
        xn = x.values[costs.flat_state_slice(i + 1)]
        residual = xn - discrete.step(xi, ui)
        ang_res = (trajectory.gimbal_angles[i + 1]
                   - trajectory.gimbal_angles[i]
                   - trajectory.dt * trajectory.gimbal_rates[i])
        dyn[i] = max(float(np.max(np.abs(residual))),
                     float(np.max(np.abs(ang_res))))

    lo, hi = bounds.force_box_low(), bounds.force_box_high()
    force_viol = np.maximum(trajectory.forces - hi, 0.0).max(axis=1)
    force_viol = np.maximum(
        force_viol, np.maximum(lo - trajectory.forces, 0.0).max(axis=1))
    moment_viol = np.maximum(
        np.abs(trajectory.yaw_moments) - bounds.yaw_moment_max, 0.0)
    input_viol = np.maximum(force_viol, moment_viol)

    gimbal_viol = np.zeros(n)
    if gimbal_limits is not None:
        checks = [
            (trajectory.gimbal_angles[:, 0], gimbal_limits.yaw_range),
            (trajectory.gimbal_angles[:, 1], gimbal_limits.pitch_range),
            (trajectory.gimbal_rates[:, 0], gimbal_limits.yaw_rate_range),
            (trajectory.gimbal_rates[:, 1], gimbal_limits.pitch_rate_range),
        ]
        for series, (lo_v, hi_v) in checks:
            gimbal_viol = np.maximum(gimbal_viol,
                                     np.maximum(series - hi_v, 0.0))
            gimbal_viol = np.maximum(gimbal_viol,
                                     np.maximum(lo_v - series, 0.0))

    clearances = np.full(n, np.inf)
    for obstacle in obstacles:
        dist = np.linalg.norm(trajectory.positions - obstacle.center, axis=1)
        clearances = np.minimum(clearances, dist - obstacle.keepout)

    obstacle_ok = bool(np.all(clearances >= -eps_ineq)) \
        if np.any(np.isfinite(clearances)) else True
    feasible = (bool(dyn.max() < eps_eq if dyn.size else True)
                and bool(np.all(input_viol <= eps_ineq))
                and bool(np.all(gimbal_viol <= eps_ineq))
                and obstacle_ok)
    return FeasibilityReport(
        eps_eq=eps_eq, eps_ineq=eps_ineq, dynamics_residuals=dyn,
        input_violations=input_viol, gimbal_violations=gimbal_viol,
        obstacle_clearances=clearances, feasible=feasible)


@dataclass
class PlanResult:
    trajectory: Trajectory
    report: IqpReport
    feasibility: FeasibilityReport
    qp_solution: QPSolution | None = None

    @property
    def succeeded(self) -> bool:
        return self.feasibility.feasible and self.report.termination not in (
            "stalled", "solver_failure")


def plan_project(project,
                 progress: Callable[[IqpIterate], None] | None = None
                 ) -> PlanResult:
    """Plan a project, dispatching to the one-shot or iterated path."""
    t0 = time.perf_counter()
    if project.weights.needs_iqp() or project.obstacles:
        trajectory, report = plan_iqp(project, progress)
        qp_solution = None
    else:
        trajectory, qp_solution = plan_linear(project)
        x = trajectory.to_stacked()
        iterate = IqpIterate(0, _true_cost(project, x), 1.0,
                             _max_violation(project, x))
        if progress:
            progress(iterate)
        termination = "converged" if qp_solution.status == "optimal" \
            else f"solver_{qp_solution.status}"
        report = IqpReport([iterate], termination,
                           time.perf_counter() - t0)
    feasibility = feasibility_report(
        trajectory, project.platform, project.input_bounds(),
        project.gimbal_limits, project.obstacles)
    return PlanResult(trajectory=trajectory, report=report,
                      feasibility=feasibility, qp_solution=qp_solution)
