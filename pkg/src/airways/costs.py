"""Objective terms over the stacked per-stage decision variables.

Every stage owns 19 scalars, stage-major:

    [0:8]    flat state  [r, yaw, r_dot, yaw_rate]
    [8:12]   flat input  [F, M_yaw]
    [12:14]  gimbal angles [yaw, pitch]
    [14:16]  gimbal rates  [yaw, pitch]
    [16:19]  camera target position

The index helpers below are the single source of truth for these offsets;
the planner builds all constraint rows through them.

Each term evaluates to its exact scalar value plus a convex quadratic model
0.5 x'Hx + f'x + c. Anchor and finite-difference terms are quadratics, so
their model is exact and iteration independent. The camera-angle and
skewness terms are nonlinear; their models are Gauss-Newton expansions
around the evaluation point (residual curvature dropped), which keeps H
positive semidefinite and matches the true gradient at the expansion point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

STRIDE = 19
QUAD_POS_OFF = 0
QUAD_YAW_OFF = 3
QUAD_VEL_OFF = 4
QUAD_YAW_RATE_OFF = 7
FORCE_OFF = 8
YAW_MOMENT_OFF = 11
GIMBAL_ANGLE_OFF = 12
GIMBAL_RATE_OFF = 14
TARGET_OFF = 16

# channel name -> (per-stage offset, component count)
# quad_state spans the full flat state: differencing positions alone leaves
# a stage-rate velocity/force sawtooth invisible to the objective (the
# trapezoidal ZOH rows allow it under smooth positions), while velocity
# rows in the window penalize it heavily
CHANNELS = {
    "quad_position": (QUAD_POS_OFF, 3),
    "quad_state": (QUAD_POS_OFF, 8),
    "target_position": (TARGET_OFF, 3),
    "gimbal_angles": (GIMBAL_ANGLE_OFF, 2),
}

_ALPHA_SINGULAR = 1e-12   # 1 - cos^2 below this: zero subgradient
_DEGENERATE_DIST = 1e-9   # quad/target coincidence threshold


def stage_base(stage: int) -> int:
    return STRIDE * stage


def quad_position_slice(stage: int) -> slice:
    b = stage_base(stage) + QUAD_POS_OFF
    return slice(b, b + 3)


def quad_yaw_index(stage: int) -> int:
    return stage_base(stage) + QUAD_YAW_OFF


def quad_velocity_slice(stage: int) -> slice:
    b = stage_base(stage) + QUAD_VEL_OFF
    return slice(b, b + 3)


def quad_yaw_rate_index(stage: int) -> int:
    return stage_base(stage) + QUAD_YAW_RATE_OFF


def flat_state_slice(stage: int) -> slice:
    b = stage_base(stage)
    return slice(b, b + 8)


def force_slice(stage: int) -> slice:
    b = stage_base(stage) + FORCE_OFF
    return slice(b, b + 3)


def yaw_moment_index(stage: int) -> int:
    return stage_base(stage) + YAW_MOMENT_OFF


def flat_input_slice(stage: int) -> slice:
    b = stage_base(stage) + FORCE_OFF
    return slice(b, b + 4)


def gimbal_angle_slice(stage: int) -> slice:
    b = stage_base(stage) + GIMBAL_ANGLE_OFF
    return slice(b, b + 2)


def gimbal_rate_slice(stage: int) -> slice:
    b = stage_base(stage) + GIMBAL_RATE_OFF
    return slice(b, b + 2)


def target_slice(stage: int) -> slice:
    b = stage_base(stage) + TARGET_OFF
    return slice(b, b + 3)


def channel_indices(channel: str, stage: int) -> np.ndarray:
    off, width = CHANNELS[channel]
    b = stage_base(stage) + off
    return np.arange(b, b + width)


@dataclass(frozen=True)
class StackedVariables:
    """The full decision vector plus its stage layout."""

    num_stages: int
    dt: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (STRIDE * self.num_stages,):
            raise ValueError(
                f"expected {STRIDE * self.num_stages} values, got {v.shape}")
        if self.num_stages < 1:
            raise ValueError("need at least one stage")
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, num_stages: int, dt: float) -> "StackedVariables":
        return cls(num_stages, dt, np.zeros(STRIDE * num_stages))

    def with_values(self, values: np.ndarray) -> "StackedVariables":
        return StackedVariables(self.num_stages, self.dt, values)

    @property
    def size(self) -> int:
        return STRIDE * self.num_stages

    def by_stage(self) -> np.ndarray:
        """(N, 19) view of the values."""
        return self.values.reshape(self.num_stages, STRIDE)

    def quad_positions(self) -> np.ndarray:
        return self.by_stage()[:, QUAD_POS_OFF:QUAD_POS_OFF + 3]

    def quad_yaws(self) -> np.ndarray:
        return self.by_stage()[:, QUAD_YAW_OFF]

    def quad_velocities(self) -> np.ndarray:
        return self.by_stage()[:, QUAD_VEL_OFF:QUAD_VEL_OFF + 3]

    def quad_yaw_rates(self) -> np.ndarray:
        return self.by_stage()[:, QUAD_YAW_RATE_OFF]

    def forces(self) -> np.ndarray:
        return self.by_stage()[:, FORCE_OFF:FORCE_OFF + 3]

    def yaw_moments(self) -> np.ndarray:
        return self.by_stage()[:, YAW_MOMENT_OFF]

    def gimbal_angles(self) -> np.ndarray:
        return self.by_stage()[:, GIMBAL_ANGLE_OFF:GIMBAL_ANGLE_OFF + 2]

    def gimbal_rates(self) -> np.ndarray:
        return self.by_stage()[:, GIMBAL_RATE_OFF:GIMBAL_RATE_OFF + 2]

    def targets(self) -> np.ndarray:
        return self.by_stage()[:, TARGET_OFF:TARGET_OFF + 3]


@dataclass(frozen=True)
class Keyframe:
    """A position anchor the vehicle should pass near at a given stage."""

    stage_index: int
    position: np.ndarray
    weight_override: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "position",
                           np.asarray(self.position, dtype=float))
        if self.position.shape != (3,):
            raise ValueError("keyframe position must be a 3-vector")
        if self.stage_index < 0:
            raise ValueError("keyframe stage must be nonnegative")
        if self.weight_override is not None and self.weight_override < 0:
            raise ValueError("keyframe weight must be nonnegative")


@dataclass(frozen=True)
class KeyTarget:
    """A camera-target anchor at a given stage."""

    stage_index: int
    position: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position",
                           np.asarray(self.position, dtype=float))
        if self.position.shape != (3,):
            raise ValueError("keytarget position must be a 3-vector")
        if self.stage_index < 0:
            raise ValueError("keytarget stage must be nonnegative")


@dataclass(frozen=True)
class GimbalLimits:
    yaw_range: tuple[float, float]
    pitch_range: tuple[float, float]
    yaw_rate_range: tuple[float, float]
    pitch_rate_range: tuple[float, float]

    def __post_init__(self):
        for name in ("yaw_range", "pitch_range", "yaw_rate_range",
                     "pitch_rate_range"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"gimbal {name} must satisfy min < max")


@dataclass(frozen=True)
class CostWeights:
    lambda_k: float = 100.0   # keyframe match
    lambda_d: float = 0.1     # quad position derivative (snap)
    lambda_t: float = 10.0    # keytarget match
    lambda_td: float = 0.1    # target derivative (jerk)
    lambda_g: float = 0.1     # gimbal angle smoothness (jerk)
    lambda_c: float = 0.0     # camera pointing
    lambda_s: float = 0.0     # perspective skewness

    def __post_init__(self):
        for name in ("lambda_k", "lambda_d", "lambda_t", "lambda_td",
                     "lambda_g", "lambda_c", "lambda_s"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    def needs_iqp(self) -> bool:
        return self.lambda_c > 0 or self.lambda_s > 0


@dataclass
class QuadraticModel:
    """Convex quadratic 0.5 x'Hx + f'x + c over the stacked variables."""

    hessian: sp.csc_matrix
    linear: np.ndarray
    constant: float

    def value_at(self, x: np.ndarray) -> float:
        return float(0.5 * x @ (self.hessian @ x) + self.linear @ x
                     + self.constant)

    def gradient_at(self, x: np.ndarray) -> np.ndarray:
        return self.hessian @ x + self.linear

    @classmethod
    def zero(cls, n: int) -> "QuadraticModel":
        return cls(sp.csc_matrix((n, n)), np.zeros(n), 0.0)


@dataclass
class TermEval:
    """A cost term's exact value and its local quadratic model."""

    value: float
    model: QuadraticModel
    degenerate_stages: tuple[int, ...] = ()


def _gauss_newton_model(n: int, residuals: np.ndarray, jac: sp.csr_matrix,
                        x0: np.ndarray) -> QuadraticModel:
    """Quadratic model of sum(residual^2) expanded around x0."""
    hessian = (2.0 * (jac.T @ jac)).tocsc()
    grad0 = 2.0 * (jac.T @ residuals)
    value0 = float(residuals @ residuals)
    linear = grad0 - hessian @ x0
    constant = value0 - float(grad0 @ x0) + 0.5 * float(x0 @ (hessian @ x0))
    return QuadraticModel(hessian, linear, constant)


def anchor_cost(x: StackedVariables, anchors, channel: str) -> TermEval:
    """Sum of squared deviations from per-stage anchor points.

    The model is exact: the Hessian does not depend on x.
    """
    if channel not in ("quad_position", "target_position"):
        raise ValueError(f"anchors not supported on channel {channel!r}")
    n = x.size
    rows, cols, vals = [], [], []
    linear = np.zeros(n)
    constant = 0.0
    value = 0.0
    for anchor in anchors:
        stage = anchor.stage_index
        if not 0 <= stage < x.num_stages:
            raise ValueError(
                f"anchor stage {stage} out of range [0, {x.num_stages})")
        weight = getattr(anchor, "weight_override", None)
        w = 1.0 if weight is None else float(weight)
        idx = channel_indices(channel, stage)
        residual = x.values[idx] - anchor.position
        value += w * float(residual @ residual)
        rows.extend(idx)
        cols.extend(idx)
        vals.extend([2.0 * w] * 3)
        linear[idx] += -2.0 * w * anchor.position
        constant += w * float(anchor.position @ anchor.position)
    hessian = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsc()
    return TermEval(value, QuadraticModel(hessian, linear, constant))


def difference_coefficients(order: int, dt: float) -> np.ndarray:
    """Backward-difference stencil for the order-th derivative, scaled 1/dt^q."""
    coeffs = np.array([(-1.0) ** (order - k) * math.comb(order, k)
                       for k in range(order + 1)])
    return coeffs / dt ** order


def derivative_cost(x: StackedVariables, order: int, channel: str) -> TermEval:
    """Squared finite-difference derivative summed over all full windows.

    A window ends at each stage i in [order, N); entries outside the horizon
    are not padded, so the term has N - order windows per component. Exact
    quadratic, zero on any polynomial of degree < order sampled at the
    stage times.
    """
    if channel not in CHANNELS:
        raise ValueError(f"unknown channel {channel!r}")
    if order < 1:
        raise ValueError("derivative order must be >= 1")
    n_stages = x.num_stages
    if n_stages <= order:
        raise ValueError(
            f"need more than {order} stages for order {order}, got {n_stages}")
    off, width = CHANNELS[channel]
    coeffs = difference_coefficients(order, x.dt)

    series = x.by_stage()[:, off:off + width]
    diffs = np.diff(series, n=order, axis=0) / x.dt ** order
    value = float(np.sum(diffs * diffs))

    n = x.size
    n_windows = n_stages - order
    rows, cols, vals = [], [], []
    for w_idx in range(n_windows):
        for comp in range(width):
            row = w_idx * width + comp
            for k in range(order + 1):
                rows.append(row)
                cols.append(stage_base(w_idx + k) + off + comp)
                vals.append(coeffs[k])
    d_mat = sp.coo_matrix((vals, (rows, cols)),
                          shape=(n_windows * width, n)).tocsr()
    hessian = (2.0 * (d_mat.T @ d_mat)).tocsc()
    return TermEval(value, QuadraticModel(hessian, np.zeros(n), 0.0))


def camera_direction(yaw: float, gimbal_yaw: float,
                     gimbal_pitch: float) -> np.ndarray:
    """Unit look direction of the camera in the world frame."""
    heading = yaw + gimbal_yaw
    cp = np.cos(gimbal_pitch)
    return np.array([cp * np.cos(heading), cp * np.sin(heading),
                     np.sin(gimbal_pitch)])


def camera_angle_error(quad_position, yaw: float, gimbal,
                       target_position) -> tuple[float, bool]:
    """Angle between the camera direction and the quad-to-target direction.

    Returns (angle in [0, pi], degenerate flag); a coincident quad and
    target make the direction undefined, reported as angle 0 with the flag
    set.
    """
    p_d = np.asarray(target_position, dtype=float) - np.asarray(
        quad_position, dtype=float)
    dist = np.linalg.norm(p_d)
    if dist < _DEGENERATE_DIST:
        return 0.0, True
    p_l = camera_direction(yaw, gimbal[0], gimbal[1])
    cos_angle = float(p_d @ p_l) / dist
    return float(np.arccos(np.clip(cos_angle, -1.0, 1.0))), False


def _camera_residual_rows(x: StackedVariables):
    """Per-stage camera angle residuals and jacobian triplets."""
    n_stages = x.num_stages
    pos = x.quad_positions()
    yaw = x.quad_yaws()
    gimbal = x.gimbal_angles()
    target = x.targets()

    residuals = np.zeros(n_stages)
    rows, cols, vals = [], [], []
    degenerate = []
    for i in range(n_stages):
        p_d = target[i] - pos[i]
        dist = np.linalg.norm(p_d)
        if dist < _DEGENERATE_DIST:
            degenerate.append(i)
            continue
        heading = yaw[i] + gimbal[i, 0]
        pitch = gimbal[i, 1]
        cp, sp_, ch, sh = np.cos(pitch), np.sin(pitch), np.cos(heading), \
            np.sin(heading)
        p_l = np.array([cp * ch, cp * sh, sp_])
        u = float(p_d @ p_l) / dist
        u_clip = min(1.0, max(-1.0, u))
        residuals[i] = np.arccos(u_clip)
        one_minus = 1.0 - u_clip * u_clip
        if one_minus < _ALPHA_SINGULAR:
            continue  # zero subgradient exactly at alignment/opposition
        dalpha_du = -1.0 / np.sqrt(one_minus)
        du_dpd = (p_l - u * p_d / dist) / dist
        dpl_dheading = np.array([-cp * sh, cp * ch, 0.0])
        dpl_dpitch = np.array([-sp_ * ch, -sp_ * sh, cp])
        du_dheading = float(p_d @ dpl_dheading) / dist
        du_dpitch = float(p_d @ dpl_dpitch) / dist

        base = stage_base(i)
        idx = ([base + QUAD_POS_OFF + k for k in range(3)]
               + [base + QUAD_YAW_OFF,
                  base + GIMBAL_ANGLE_OFF, base + GIMBAL_ANGLE_OFF + 1]
               + [base + TARGET_OFF + k for k in range(3)])
        grad = np.concatenate([
            dalpha_du * -du_dpd,
            [dalpha_du * du_dheading, dalpha_du * du_dheading,
             dalpha_du * du_dpitch],
            dalpha_du * du_dpd,
        ])
        rows.extend([i] * len(idx))
        cols.extend(idx)
        vals.extend(grad)
    jac = sp.coo_matrix((vals, (rows, cols)),
                        shape=(n_stages, x.size)).tocsr()
    return residuals, jac, tuple(degenerate)


def camera_cost(x: StackedVariables) -> TermEval:
    """Sum of squared camera-angle errors with a Gauss-Newton model."""
    residuals, jac, degenerate = _camera_residual_rows(x)
    model = _gauss_newton_model(x.size, residuals, jac, x.values)
    return TermEval(float(residuals @ residuals), model, degenerate)


def skewness_error(quad_position, target_position, target_half_height: float,
                   eps_den_rel: float = 1e-6) -> tuple[float, bool]:
    """Perspective skew of a vertical target seen from the quad.

    Compares the distances to the top and bottom of the target's vertical
    extent; zero when the view direction is level. The half-height vector
    flips sign when looking down at the target so shots from above and
    below the same offset score identically. Returns (value, degenerate
    flag); the flag marks a vanishing denominator (or coincident points)
    and callers drop the term at that stage.
    """
    p_d = np.asarray(target_position, dtype=float) - np.asarray(
        quad_position, dtype=float)
    a = float(p_d @ p_d)
    if a < _DEGENERATE_DIST ** 2:
        return 0.0, True
    h_signed = target_half_height if p_d[2] >= 0.0 else -target_half_height
    b = 0.5 * h_signed * p_d[2]
    den = a - b
    if abs(den) < eps_den_rel * a:
        return 0.0, True
    return (a + b) / den - 1.0, False


def _skewness_residual_rows(x: StackedVariables, half_height: float,
                            eps_den_rel: float = 1e-6):
    n_stages = x.num_stages
    pos = x.quad_positions()
    target = x.targets()
    residuals = np.zeros(n_stages)
    rows, cols, vals = [], [], []
    degenerate = []
    for i in range(n_stages):
        p_d = target[i] - pos[i]
        a = float(p_d @ p_d)
        if a < _DEGENERATE_DIST ** 2:
            degenerate.append(i)
            continue
        h_signed = half_height if p_d[2] >= 0.0 else -half_height
        h_vec = np.array([0.0, 0.0, h_signed])
        b = 0.5 * h_signed * p_d[2]
        den = a - b
        if abs(den) < eps_den_rel * a:
            degenerate.append(i)
            continue
        residuals[i] = (a + b) / den - 1.0
        ds_dpd = 2.0 * (a * 0.5 * h_vec - b * 2.0 * p_d) / (den * den)
        base = stage_base(i)
        idx = ([base + QUAD_POS_OFF + k for k in range(3)]
               + [base + TARGET_OFF + k for k in range(3)])
        grad = np.concatenate([-ds_dpd, ds_dpd])
        rows.extend([i] * len(idx))
        cols.extend(idx)
        vals.extend(grad)
    jac = sp.coo_matrix((vals, (rows, cols)),
                        shape=(n_stages, x.size)).tocsr()
    return residuals, jac, tuple(degenerate)


def skewness_cost(x: StackedVariables, target_half_height: float) -> TermEval:
    """Sum of squared skewness errors with a Gauss-Newton model."""
    residuals, jac, degenerate = _skewness_residual_rows(
        x, target_half_height)
    model = _gauss_newton_model(x.size, residuals, jac, x.values)
    return TermEval(float(residuals @ residuals), model, degenerate)


@dataclass
class TotalCost:
    value: float
    model: QuadraticModel
    term_values: dict[str, float]
    degenerate_stages: tuple[int, ...]


def total_cost(x: StackedVariables, weights: CostWeights, keyframes,
               keytargets=(), target_half_height: float = 0.0,
               quad_derivative_order: int = 4,
               target_derivative_order: int = 3,
               gimbal_derivative_order: int = 3) -> TotalCost:
    """Weighted sum of all enabled terms; disabled terms are skipped."""
    terms: list[tuple[str, float, TermEval]] = []
    if weights.lambda_k > 0 and keyframes:
        terms.append(("keyframe", weights.lambda_k,
                      anchor_cost(x, keyframes, "quad_position")))
    if weights.lambda_d > 0:
        terms.append(("quad_derivative", weights.lambda_d,
                      derivative_cost(x, quad_derivative_order,
                                      "quad_state")))
    if weights.lambda_t > 0 and keytargets:
        terms.append(("keytarget", weights.lambda_t,
                      anchor_cost(x, keytargets, "target_position")))
    if weights.lambda_td > 0:
        terms.append(("target_derivative", weights.lambda_td,
                      derivative_cost(x, target_derivative_order,
                                      "target_position")))
    if weights.lambda_g > 0:
        terms.append(("gimbal_smoothness", weights.lambda_g,
                      derivative_cost(x, gimbal_derivative_order,
                                      "gimbal_angles")))
    if weights.lambda_c > 0:
        terms.append(("camera_angle", weights.lambda_c, camera_cost(x)))
    if weights.lambda_s > 0:
        terms.append(("skewness", weights.lambda_s,
                      skewness_cost(x, target_half_height)))

    n = x.size
    hessian = sp.csc_matrix((n, n))
    linear = np.zeros(n)
    constant = 0.0
    value = 0.0
    term_values: dict[str, float] = {}
    degenerate: set[int] = set()
    for name, lam, term in terms:
        value += lam * term.value
        term_values[name] = term.value
        hessian = hessian + lam * term.model.hessian
        linear += lam * term.model.linear
        constant += lam * term.model.constant
        degenerate.update(term.degenerate_stages)
    return TotalCost(value, QuadraticModel(hessian.tocsc(), linear, constant),
                     term_values, tuple(sorted(degenerate)))
