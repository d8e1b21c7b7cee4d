"""Closed-loop tracking simulation on the full nonlinear rigid body.

The controller is a cascade. An outer position loop turns position and
velocity error plus a gravity/acceleration feedforward into a desired
world-frame force. That force fixes the desired body z-axis; together with
the reference yaw it defines the desired attitude, which an inner loop on
the rotation group turns into body moments. Thrust is the projection of
the desired force onto the actual body z-axis. Rotor commands come from
inverting the mixer and are saturated at the physical per-rotor limit.

Integration is classic RK4 on the packed state [r, v, R, omega] with the
command held constant over each step; the rotation is projected back onto
the orthonormal manifold after every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    FlatState,
    FullState,
    PlatformParams,
    inverse_mixer,
    mixer,
    rigid_body_derivative,
    skew,
    vee,
)
from .planner import Trajectory

DEFAULT_DT_SIM = 0.002


class SimulationDiverged(RuntimeError):
    """Raised when the tracking error leaves the divergence guard radius."""

    def __init__(self, time: float, stage: int, position_error: float):
        super().__init__(
            f"simulation diverged at t={time:.3f}s (stage {stage}): "
            f"position error {position_error:.3f} m")
        self.time = time
        self.stage = stage
        self.position_error = position_error


@dataclass(frozen=True)
class ControllerGains:
    """Diagonal loop gains. position/velocity act on translational error in
    force units; attitude/rate act on the rotation error in moment units."""

    position: np.ndarray
    velocity: np.ndarray
    attitude: np.ndarray
    rate: np.ndarray

    def __post_init__(self):
        for name in ("position", "velocity", "attitude", "rate"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (3,):
                raise ValueError(f"{name} gains must be a 3-vector")
            if np.any(v <= 0):
                raise ValueError(f"{name} gains must be positive")
            object.__setattr__(self, name, v)

    @classmethod
    def defaults(cls, params: PlatformParams) -> "ControllerGains":
        """Mass/inertia scaled defaults, critically damped per axis."""
        inertia = np.diag(params.inertia_body)
        return cls(
            position=8.0 * params.mass * np.ones(3),
            velocity=5.0 * params.mass * np.ones(3),
            attitude=64.0 * inertia,
            rate=16.0 * inertia,
        )


def lqr_position_gains(params: PlatformParams, q_position: float = 8.0,
                       q_velocity: float = 2.0, r_force: float = 0.1
                       ) -> tuple[np.ndarray, np.ndarray]:
    """Offline LQR synthesis for the translational double integrator.

    Solves the continuous-time Riccati equation per axis and returns the
    (position, velocity) feedback gains in force units.
    """
    from scipy.linalg import solve_continuous_are

    a = np.array([[0.0, 1.0], [0.0, 0.0]])
    b = np.array([[0.0], [1.0 / params.mass]])
    q = np.diag([q_position, q_velocity])
    r = np.array([[r_force]])
    p = solve_continuous_are(a, b, q, r)
    k = (np.linalg.solve(r, b.T @ p)).ravel()
    return np.full(3, k[0]), np.full(3, k[1])


def position_controller(state: FullState, ref: FlatState, accel_ff,
                        gains: ControllerGains,
                        params: PlatformParams) -> np.ndarray:
    """Desired world-frame force from state feedback plus feedforward."""
    accel_ff = np.asarray(accel_ff, dtype=float)
    feedback = (-gains.position * (state.position - ref.position)
                - gains.velocity * (state.velocity - ref.velocity))
    gravity_ff = np.array([0.0, 0.0, params.gravity])
    return feedback + params.mass * (gravity_ff + accel_ff)


def attitude_setpoint(f_d, yaw_d: float, previous: np.ndarray | None = None
                      ) -> tuple[np.ndarray, bool]:
    """Desired rotation with body z along the force and heading from yaw.

    Degenerate force (norm below 1e-9) holds the previous setpoint;
    a force parallel to the heading vector perturbs the yaw by 1e-6 rad.
    Both are reported through the flag.
    """
    f_d = np.asarray(f_d, dtype=float)
    norm = float(np.linalg.norm(f_d))
    if norm < 1e-9:
        fallback = np.eye(3) if previous is None else previous
        return fallback, True
    z_b = f_d / norm
    flagged = False
    heading = np.array([math.cos(yaw_d), math.sin(yaw_d), 0.0])
    cross = np.cross(z_b, heading)
    if np.linalg.norm(cross) < 1e-9:
        yaw_d += 1e-6
        heading = np.array([math.cos(yaw_d), math.sin(yaw_d), 0.0])
        cross = np.cross(z_b, heading)
        flagged = True
    y_b = cross / np.linalg.norm(cross)
    x_b = np.cross(y_b, z_b)
    return np.column_stack([x_b, y_b, z_b]), flagged


def attitude_controller(rotation, rotation_d, omega, omega_d,
                        gains: ControllerGains) -> np.ndarray:
    """Body moments from the rotation-group error and rate error."""
    rotation = np.asarray(rotation, dtype=float)
    rotation_d = np.asarray(rotation_d, dtype=float)
    e_rot = 0.5 * vee(rotation_d.T @ rotation - rotation.T @ rotation_d)
    e_omega = np.asarray(omega, dtype=float) \
        - rotation.T @ (rotation_d @ np.asarray(omega_d, dtype=float))
    return -gains.attitude * e_rot - gains.rate * e_omega


def thrust_projection(f_d, rotation) -> float:
    """Collective thrust: desired force projected on the actual body z."""
    return float(np.asarray(f_d, dtype=float)
                 @ np.asarray(rotation, dtype=float)[:, 2])


def rk4_step(f, t: float, y: np.ndarray, h: float) -> np.ndarray:
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _pack(position, velocity, rotation, omega) -> np.ndarray:
    return np.concatenate([position, velocity, rotation.ravel(), omega])


def _unpack(y: np.ndarray):
    return y[0:3], y[3:6], y[6:15].reshape(3, 3), y[15:18]


def _derivative(y: np.ndarray, u: np.ndarray,
                params: PlatformParams) -> np.ndarray:
    pos, vel, rot, omega = _unpack(y)
    p_dot, v_dot, r_dot, w_dot = rigid_body_derivative(
        pos, vel, rot, omega, u, params)
    return np.concatenate([p_dot, v_dot, r_dot.ravel(), w_dot])


def integrate_rigid_body(params: PlatformParams, state0: FullState, u_of_t,
                         duration: float, dt: float,
                         renormalize: bool = True) -> FullState:
    """Open-loop integration under a (possibly time-varying) input law."""
    y = _pack(state0.position, state0.velocity, state0.rotation,
              state0.body_rates)
    t = 0.0
    while t < duration - 1e-12:
        h = min(dt, duration - t)
        y = rk4_step(lambda tt, yy: _derivative(yy, np.asarray(u_of_t(tt)),
                                                params), t, y, h)
        if renormalize:
            pos, vel, rot, omega = _unpack(y)
            y = _pack(pos, vel, _project_rotation(rot), omega)
        t += h
    pos, vel, rot, omega = _unpack(y)
    return FullState(pos, vel, _project_rotation(rot), omega)


def _project_rotation(rot: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(rot)
    out = u @ vt
    if np.linalg.det(out) < 0.0:
        u[:, -1] = -u[:, -1]
        out = u @ vt
    return out


@dataclass
class SimLog:
    """Time series of a tracking run plus summary metrics."""

    dt_sim: float
    times: np.ndarray              # (S,)
    positions: np.ndarray          # (S, 3)
    velocities: np.ndarray         # (S, 3)
    rotations: np.ndarray          # (S, 3, 3)
    body_rates: np.ndarray         # (S, 3)
    ref_positions: np.ndarray      # (S, 3)
    ref_velocities: np.ndarray     # (S, 3)
    ref_yaws: np.ndarray           # (S,)
    commanded: np.ndarray          # (S-1, 4) pre-saturation [u1,u2,u3,u4]
    realized: np.ndarray           # (S-1, 4) after rotor saturation
    saturated: np.ndarray          # (S-1,) bool

    @property
    def num_samples(self) -> int:
        return self.times.shape[0]

    def yaws(self) -> np.ndarray:
        return np.arctan2(self.rotations[:, 1, 0], self.rotations[:, 0, 0])

    def position_errors(self) -> np.ndarray:
        return np.linalg.norm(self.positions - self.ref_positions, axis=1)

    @property
    def rms_position_error(self) -> float:
        return float(np.sqrt(np.mean(self.position_errors() ** 2)))

    @property
    def max_position_error(self) -> float:
        return float(np.max(self.position_errors()))

    @property
    def rms_yaw_error(self) -> float:
        diff = self.yaws() - self.ref_yaws
        wrapped = np.arctan2(np.sin(diff), np.cos(diff))
        return float(np.sqrt(np.mean(wrapped ** 2)))

    @property
    def any_saturation(self) -> bool:
        return bool(np.any(self.saturated))

    def summary(self) -> dict:
        return {
            "rms_position_error": self.rms_position_error,
            "max_position_error": self.max_position_error,
            "rms_yaw_error": self.rms_yaw_error,
            "samples": self.num_samples,
            "duration": float(self.times[-1]),
            "saturated_steps": int(np.count_nonzero(self.saturated)),
        }

    def state_at(self, index: int) -> FullState:
        return FullState(self.positions[index], self.velocities[index],
                         self.rotations[index], self.body_rates[index])


class _Reference:
    """Linear interpolation of a planned trajectory with ZOH acceleration."""

    def __init__(self, trajectory: Trajectory):
        self.traj = trajectory
        self.dt = trajectory.dt
        self.accels = np.zeros_like(trajectory.velocities)
        if trajectory.num_stages > 1:
            self.accels[:-1] = np.diff(trajectory.velocities, axis=0) \
                / self.dt
            self.accels[-1] = self.accels[-2]

    def at(self, t: float):
        traj = self.traj
        last = traj.num_stages - 1
        s = min(max(t / self.dt, 0.0), float(last))
        i = min(int(s), last - 1) if last > 0 else 0
        frac = s - i
        pos = (1 - frac) * traj.positions[i] + frac * traj.positions[i + 1]
        vel = (1 - frac) * traj.velocities[i] + frac * traj.velocities[i + 1]
        yaw = (1 - frac) * traj.yaws[i] + frac * traj.yaws[i + 1]
        yaw_rate = (1 - frac) * traj.yaw_rates[i] \
            + frac * traj.yaw_rates[i + 1]
        return FlatState(pos, float(yaw), vel, float(yaw_rate)), \
            self.accels[i]


def simulate_tracking(trajectory: Trajectory, params: PlatformParams,
                      gains: ControllerGains | None = None,
                      dt_sim: float = DEFAULT_DT_SIM,
                      initial_state: FullState | None = None) -> SimLog:
    """Fly the planned trajectory closed loop and log the tracking record.

    Aborts with `SimulationDiverged` when the position error exceeds ten
    trajectory bounding-box diagonals (at least 10 m).
    """
    if dt_sim <= 0:
        raise ValueError("dt_sim must be positive")
    if dt_sim > trajectory.dt + 1e-12:
        raise ValueError("dt_sim must not exceed the trajectory step")
    gains = gains or ControllerGains.defaults(params)
    ref = _Reference(trajectory)
    duration = trajectory.duration
    n_steps = max(1, math.ceil(duration / dt_sim - 1e-9))
    guard = 10.0 * max(trajectory.bounding_box_diagonal(), 1.0)

    if initial_state is None:
        yaw0 = float(trajectory.yaws[0])
        rot0 = np.array([
            [math.cos(yaw0), -math.sin(yaw0), 0.0],
            [math.sin(yaw0), math.cos(yaw0), 0.0],
            [0.0, 0.0, 1.0],
        ])
        initial_state = FullState(
            position=trajectory.positions[0],
            velocity=trajectory.velocities[0],
            rotation=rot0,
            body_rates=np.array([0.0, 0.0, float(trajectory.yaw_rates[0])]))

    samples = n_steps + 1
    log = SimLog(
        dt_sim=dt_sim,
        times=np.zeros(samples),
        positions=np.zeros((samples, 3)),
        velocities=np.zeros((samples, 3)),
        rotations=np.zeros((samples, 3, 3)),
        body_rates=np.zeros((samples, 3)),
        ref_positions=np.zeros((samples, 3)),
        ref_velocities=np.zeros((samples, 3)),
        ref_yaws=np.zeros(samples),
        commanded=np.zeros((n_steps, 4)),
        realized=np.zeros((n_steps, 4)),
        saturated=np.zeros(n_steps, dtype=bool),
    )

    y = _pack(initial_state.position, initial_state.velocity,
              initial_state.rotation, initial_state.body_rates)
    rotation_d_prev = None
    t = 0.0

    def record(index: int, t: float):
        pos, vel, rot, omega = _unpack(y)
        flat, _ = ref.at(t)
        log.times[index] = t
        log.positions[index] = pos
        log.velocities[index] = vel
        log.rotations[index] = rot
        log.body_rates[index] = omega
        log.ref_positions[index] = flat.position
        log.ref_velocities[index] = flat.velocity
        log.ref_yaws[index] = flat.yaw
        return float(np.linalg.norm(pos - flat.position))

    record(0, 0.0)
    for step in range(n_steps):
        h = min(dt_sim, duration - t)
        pos, vel, rot, omega = _unpack(y)
        flat, accel_ff = ref.at(t)
        state = FullState(pos, vel, _project_rotation(rot), omega)
        f_d = position_controller(state, flat, accel_ff, gains, params)
        rotation_d, _ = attitude_setpoint(f_d, flat.yaw, rotation_d_prev)
        rotation_d_prev = rotation_d
        u1 = thrust_projection(f_d, state.rotation)
        omega_d = np.array([0.0, 0.0, flat.yaw_rate])
        moments = attitude_controller(state.rotation, rotation_d,
                                      state.body_rates, omega_d, gains)
        u_cmd = np.array([u1, moments[0], moments[1], moments[2]])
        w2, saturated = inverse_mixer(u_cmd, params)
        u_real = mixer(w2, params)
        log.commanded[step] = u_cmd
        log.realized[step] = u_real
        log.saturated[step] = saturated

        y = rk4_step(lambda tt, yy: _derivative(yy, u_real, params), t, y, h)
        pos, vel, rot, omega = _unpack(y)
        y = _pack(pos, vel, _project_rotation(rot), omega)
        t += h
        err = record(step + 1, t)
        if err > guard:
            raise SimulationDiverged(t, int(round(t / trajectory.dt)), err)
    return log
