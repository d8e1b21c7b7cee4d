"""Quadrotor models used by the planner and the simulator.

Two models live here. The planning model treats the vehicle as a point mass
with a yaw inertia: flat state [r, psi, r_dot, psi_dot] in R^8 driven by a
world-frame force and a yaw moment. It is linear, and `discretize` produces
its exact zero-order-hold discretization. The simulation model is the full
rigid body (position, rotation matrix, body rates) with the four-rotor mixer
mapping squared rotor speeds to collective thrust and body moments.

`derive_input_bounds` converts per-rotor force/moment limits into bounds on
the planning inputs: reserving a fraction beta of the yaw-moment authority
caps the collective thrust at (1 - beta/2) of its maximum, and the thrust
norm ball is shrunk to an axis-aligned box around hover so the planner only
needs linear inequalities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_GRAVITY = 9.81
DEFAULT_BETA = 0.2

# Flat-state component offsets, shared with the stacked-variable layout.
POS = slice(0, 3)
YAW = 3
VEL = slice(4, 7)
YAW_RATE = 7
FLAT_STATE_DIM = 8
FLAT_INPUT_DIM = 4


def _as_vec3(v) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class PlatformParams:
    """Physical constants of the vehicle.

    inertia_body is the 3x3 body-frame inertia; it must be symmetric positive
    definite and is assumed diagonal. The yaw inertia used by the planning
    model is its z entry.
    """

    mass: float
    inertia_body: np.ndarray
    rotor_thrust_coeff: float
    rotor_moment_coeff: float
    arm_length: float
    rotor_force_max: float
    rotor_moment_max: float
    gravity: float = DEFAULT_GRAVITY

    def __post_init__(self):
        inertia = np.asarray(self.inertia_body, dtype=float)
        if inertia.shape != (3, 3):
            raise ValueError("inertia_body must be 3x3")
        object.__setattr__(self, "inertia_body", inertia)
        for name in ("mass", "rotor_thrust_coeff", "rotor_moment_coeff",
                     "arm_length", "rotor_force_max", "rotor_moment_max",
                     "gravity"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if not np.allclose(inertia, inertia.T, atol=1e-12):
            raise ValueError("inertia_body must be symmetric")
        if np.any(np.linalg.eigvalsh(inertia) <= 0.0):
            raise ValueError("inertia_body must be positive definite")

    @property
    def inertia_yaw(self) -> float:
        return float(self.inertia_body[2, 2])

    @property
    def hover_force(self) -> np.ndarray:
        """World-frame force that exactly cancels gravity."""
        return np.array([0.0, 0.0, self.mass * self.gravity])


@dataclass(frozen=True)
class FlatState:
    """Planning-model state: position, yaw and their rates (8 scalars).

    Yaw is kept unwrapped (continuous) along a trajectory.
    """

    position: np.ndarray
    yaw: float
    velocity: np.ndarray
    yaw_rate: float

    def __post_init__(self):
        object.__setattr__(self, "position", _as_vec3(self.position))
        object.__setattr__(self, "velocity", _as_vec3(self.velocity))

    def as_vector(self) -> np.ndarray:
        x = np.empty(FLAT_STATE_DIM)
        x[POS] = self.position
        x[YAW] = self.yaw
        x[VEL] = self.velocity
        x[YAW_RATE] = self.yaw_rate
        return x

    @classmethod
    def from_vector(cls, x) -> "FlatState":
        x = np.asarray(x, dtype=float)
        if x.shape != (FLAT_STATE_DIM,):
            raise ValueError(f"expected an 8-vector, got shape {x.shape}")
        return cls(position=x[POS].copy(), yaw=float(x[YAW]),
                   velocity=x[VEL].copy(), yaw_rate=float(x[YAW_RATE]))


@dataclass(frozen=True)
class FlatInput:
    """Planning-model input: world-frame force and yaw moment."""

    force: np.ndarray
    yaw_moment: float

    def __post_init__(self):
        object.__setattr__(self, "force", _as_vec3(self.force))

    def as_vector(self) -> np.ndarray:
        return np.array([self.force[0], self.force[1], self.force[2],
                         self.yaw_moment])

    @classmethod
    def from_vector(cls, u) -> "FlatInput":
        u = np.asarray(u, dtype=float)
        if u.shape != (FLAT_INPUT_DIM,):
            raise ValueError(f"expected a 4-vector, got shape {u.shape}")
        return cls(force=u[:3].copy(), yaw_moment=float(u[3]))


@dataclass(frozen=True)
class InputBounds:
    """Input limits for the planning model.

    force_norm_max bounds ||F||; per_axis_force_box holds the half-widths of
    the inscribed box centered at force_box_center (hover thrust), which is
    what the planner actually enforces. yaw_moment_max bounds |M_yaw|.
    """

    force_norm_max: float
    yaw_moment_max: float
    per_axis_force_box: np.ndarray
    force_box_center: np.ndarray
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "per_axis_force_box",
                           _as_vec3(self.per_axis_force_box))
        object.__setattr__(self, "force_box_center",
                           _as_vec3(self.force_box_center))

    def force_box_low(self) -> np.ndarray:
        return self.force_box_center - self.per_axis_force_box

    def force_box_high(self) -> np.ndarray:
        return self.force_box_center + self.per_axis_force_box


def derive_input_bounds(params: PlatformParams,
                        beta: float = DEFAULT_BETA) -> InputBounds:
    """Derive planning-input bounds from per-rotor limits.

    With all four rotors full on the collective thrust tops out at
    4*F_max, and spinning two same-handed rotors full on with the other
    two off gives the peak yaw moment 2*M_max. Guaranteeing a yaw moment
    of beta * 2*M_max at all times costs thrust: two rotors must stay at
    (1 - beta) * F_max, so the usable thrust norm is (1 - beta/2) * 4*F_max.

    The norm ball is then replaced by the largest symmetric box centered at
    hover thrust that the ball still contains (half-width
    (limit - m*g)/sqrt(3) per axis), so force bounds stay linear.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    force_norm_max = (1.0 - beta / 2.0) * 4.0 * params.rotor_force_max
    yaw_moment_max = beta * 2.0 * params.rotor_moment_max
    hover = params.mass * params.gravity
    if force_norm_max <= hover:
        raise ValueError(
            f"thrust limit {force_norm_max:.3f} N cannot sustain hover "
            f"({hover:.3f} N); lower beta or the platform mass")
    half_width = (force_norm_max - hover) / np.sqrt(3.0)
    return InputBounds(
        force_norm_max=force_norm_max,
        yaw_moment_max=yaw_moment_max,
        per_axis_force_box=np.full(3, half_width),
        force_box_center=np.array([0.0, 0.0, hover]),
        beta=beta,
    )


def flat_acceleration(state: FlatState, inp: FlatInput,
                      params: PlatformParams) -> tuple[np.ndarray, float]:
    """Continuous planning model: accelerations from force and yaw moment."""
    linear = inp.force / params.mass + np.array([0.0, 0.0, -params.gravity])
    yaw = inp.yaw_moment / params.inertia_yaw
    return linear, yaw


@dataclass(frozen=True)
class DiscreteDynamics:
    """Exact ZOH discretization x_next = a_mat x + b_mat u + c_vec."""

    a_mat: np.ndarray
    b_mat: np.ndarray
    c_vec: np.ndarray
    dt: float

    def step(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.a_mat @ x + self.b_mat @ u + self.c_vec


def discretize(params: PlatformParams, dt: float) -> DiscreteDynamics:
    """Exact zero-order-hold discretization of the flat double integrator.

    Holding the input constant over [0, dt] integrates analytically, so the
    discrete step reproduces the continuous solution to machine precision.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    a = np.eye(FLAT_STATE_DIM)
    a[0:4, 4:8] = dt * np.eye(4)

    inv_inertia = np.diag([1.0 / params.mass] * 3 + [1.0 / params.inertia_yaw])
    b = np.zeros((FLAT_STATE_DIM, FLAT_INPUT_DIM))
    b[0:4, :] = 0.5 * dt * dt * inv_inertia
    b[4:8, :] = dt * inv_inertia

    c = np.zeros(FLAT_STATE_DIM)
    c[2] = -0.5 * params.gravity * dt * dt
    c[6] = -params.gravity * dt
    return DiscreteDynamics(a_mat=a, b_mat=b, c_vec=c, dt=dt)


def mixer_matrix(params: PlatformParams) -> np.ndarray:
    """4x4 map from squared rotor speeds to [u1, u2, u3, u4]."""
    kf = params.rotor_thrust_coeff
    km = params.rotor_moment_coeff
    kfl = kf * params.arm_length
    return np.array([
        [kf, kf, kf, kf],
        [0.0, kfl, 0.0, -kfl],
        [-kfl, 0.0, kfl, 0.0],
        [km, -km, km, -km],
    ])


def mixer(rotor_speeds_sq, params: PlatformParams) -> np.ndarray:
    """Collective thrust and body moments produced by the four rotors."""
    w2 = np.asarray(rotor_speeds_sq, dtype=float)
    if w2.shape != (4,):
        raise ValueError(f"expected 4 squared rotor speeds, got {w2.shape}")
    return mixer_matrix(params) @ w2


def inverse_mixer(u, params: PlatformParams) -> tuple[np.ndarray, bool]:
    """Squared rotor speeds realizing input u = [u1, u2, u3, u4].

    Entries outside the feasible range [0, F_max/k_F] are clamped and the
    saturation flag is set; within range, mixer(inverse_mixer(u)) == u.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (4,):
        raise ValueError(f"expected a 4-vector input, got {u.shape}")
    w2 = np.linalg.solve(mixer_matrix(params), u)
    w2_max = params.rotor_force_max / params.rotor_thrust_coeff
    clamped = np.clip(w2, 0.0, w2_max)
    tol = 1e-9 * max(1.0, w2_max)  # ignore roundoff from the solve
    saturated = bool(np.any(w2 < -tol) or np.any(w2 > w2_max + tol))
    return clamped, saturated


def skew(v) -> np.ndarray:
    """Skew-symmetric matrix such that skew(v) @ w == cross(v, w)."""
    v = _as_vec3(v)
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def vee(m) -> np.ndarray:
    """Inverse of `skew`: vee(skew(v)) == v."""
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got {m.shape}")
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


@dataclass(frozen=True)
class FullState:
    """Rigid-body state: position, velocity, rotation and body rates.

    rotation maps body to world; body_rates are expressed in the body frame
    so the kinematics are R_dot = R @ skew(omega).
    """

    position: np.ndarray
    velocity: np.ndarray
    rotation: np.ndarray
    body_rates: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", _as_vec3(self.position))
        object.__setattr__(self, "velocity", _as_vec3(self.velocity))
        object.__setattr__(self, "body_rates", _as_vec3(self.body_rates))
        rot = np.asarray(self.rotation, dtype=float)
        if rot.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if np.max(np.abs(rot.T @ rot - np.eye(3))) > 1e-9:
            raise ValueError("rotation must be orthonormal within 1e-9")
        if np.linalg.det(rot) < 0.0:
            raise ValueError("rotation must have determinant +1")
        object.__setattr__(self, "rotation", rot)

    @classmethod
    def hover(cls, position=(0.0, 0.0, 0.0)) -> "FullState":
        return cls(position=np.asarray(position, dtype=float),
                   velocity=np.zeros(3), rotation=np.eye(3),
                   body_rates=np.zeros(3))


@dataclass(frozen=True)
class FullStateDerivative:
    position_dot: np.ndarray
    velocity_dot: np.ndarray
    rotation_dot: np.ndarray
    body_rates_dot: np.ndarray


def rigid_body_derivative(position: np.ndarray, velocity: np.ndarray,
                          rotation: np.ndarray, body_rates: np.ndarray,
                          u: np.ndarray, params: PlatformParams
                          ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Unchecked rigid-body equations of motion on raw arrays.

    Accepts rotations slightly off the manifold; integrator substeps are
    not orthonormal.
    """
    thrust_world = u[0] * rotation[:, 2]
    velocity_dot = thrust_world / params.mass + np.array(
        [0.0, 0.0, -params.gravity])
    moment = u[1:4]
    inertia = params.inertia_body
    body_rates_dot = np.linalg.solve(
        inertia, moment - np.cross(body_rates, inertia @ body_rates))
    rotation_dot = rotation @ skew(body_rates)
    return velocity.copy(), velocity_dot, rotation_dot, body_rates_dot


def nonlinear_derivative(state: FullState, u,
                         params: PlatformParams) -> FullStateDerivative:
    """Time derivative of the full nonlinear model under input u.

    Newton for the translation (thrust along the body z-axis plus gravity)
    and Euler's rotation equations for the body rates.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (4,):
        raise ValueError(f"expected a 4-vector input, got {u.shape}")
    pos_dot, vel_dot, rot_dot, rates_dot = rigid_body_derivative(
        state.position, state.velocity, state.rotation, state.body_rates,
        u, params)
    return FullStateDerivative(position_dot=pos_dot, velocity_dot=vel_dot,
                               rotation_dot=rot_dot, body_rates_dot=rates_dot)
