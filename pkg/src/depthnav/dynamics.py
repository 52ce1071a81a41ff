"""Quadrotor dynamics, simulated state estimation, and EKF covariance propagation.

The vehicle model is the usual first-order-attitude-loop quadrotor with
horizontal drag: attitude commands track through first-order lags,
vertical speed tracks its command, yaw rate is commanded directly, and
tilt produces horizontal acceleration through gravity. Discretized by
forward Euler.

State vector ordering: [px, py, pz, vx, vy, vz, roll, pitch, yaw].
Uncertainty is tracked over the leading 8 components (yaw is propagated
as a mean only), so process/estimator covariances and Jacobians are 8x8.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from depthnav.geometry import GaussianState, Pose, symmetrize

__all__ = [
    "STATE_DIM",
    "COV_DIM",
    "MavState",
    "ControlInput",
    "DynamicsParams",
    "NoiseConfig",
    "StateEstimate",
    "dynamics_step",
    "dynamics_step_vec",
    "simulate_step",
    "estimate_state",
    "jacobian",
    "full_jacobians",
    "propagate_covariance",
]

STATE_DIM = 9
COV_DIM = 8

_DEFAULT_PROCESS_DIAG = np.array([1e-4] * 3 + [1e-3] * 3 + [1e-4] * 2)
_DEFAULT_ESTIMATOR_DIAG = np.array([4e-4] * 3 + [2.5e-3] * 3 + [1e-4] * 2)


@dataclass(frozen=True)
class MavState:
    """Position, velocity and Z-Y-X Euler attitude of the vehicle."""

    position: np.ndarray
    velocity: np.ndarray
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float))
        if self.position.shape != (3,) or self.velocity.shape != (3,):
            raise ValueError("position and velocity must be 3-vectors")
        if abs(self.roll) >= math.pi / 2 or abs(self.pitch) >= math.pi / 2:
            raise ValueError("roll/pitch out of range")

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity,
                               [self.roll, self.pitch, self.yaw]])

    @classmethod
    def from_vector(cls, x) -> "MavState":
        x = np.asarray(x, dtype=float)
        return cls(x[0:3].copy(), x[3:6].copy(), float(x[6]), float(x[7]), float(x[8]))

    @classmethod
    def hover(cls, position, yaw: float = 0.0) -> "MavState":
        return cls(np.asarray(position, dtype=float), np.zeros(3), 0.0, 0.0, yaw)

    def pose(self) -> Pose:
        return Pose(self.position, self.roll, self.pitch, self.yaw)

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.velocity))


@dataclass(frozen=True)
class ControlInput:
    """Commanded roll/pitch angles, vertical speed, and yaw rate.

    Zero input is hover: gravity is assumed pre-compensated.
    """

    roll_cmd: float = 0.0
    pitch_cmd: float = 0.0
    vz_cmd: float = 0.0
    yaw_rate_cmd: float = 0.0

    def as_vector(self) -> np.ndarray:
        return np.array([self.roll_cmd, self.pitch_cmd, self.vz_cmd, self.yaw_rate_cmd])

    @classmethod
    def from_vector(cls, u) -> "ControlInput":
        u = np.asarray(u, dtype=float)
        return cls(float(u[0]), float(u[1]), float(u[2]), float(u[3]))


@dataclass(frozen=True)
class DynamicsParams:
    """Model constants; defaults sized for a small consumer quadrotor."""

    gravity: float = 9.81
    drag_coeff: float = 0.35        # horizontal drag, 1/s
    tau_rp: float = 0.2             # roll/pitch response time constant, s
    tau_z: float = 0.3              # vertical speed response time constant, s
    attitude_limit: float = math.radians(30.0)


@dataclass(frozen=True)
class NoiseConfig:
    """Per-step process noise W and simulated-estimator noise, both 8x8."""

    process_cov: np.ndarray = field(
        default_factory=lambda: np.diag(_DEFAULT_PROCESS_DIAG))
    estimator_cov: np.ndarray = field(
        default_factory=lambda: np.diag(_DEFAULT_ESTIMATOR_DIAG))

    def __post_init__(self):
        w = np.asarray(self.process_cov, dtype=float)
        e = np.asarray(self.estimator_cov, dtype=float)
        object.__setattr__(self, "process_cov", w)
        object.__setattr__(self, "estimator_cov", e)
        for m, name in ((w, "process_cov"), (e, "estimator_cov")):
            if m.shape != (COV_DIM, COV_DIM):
                raise ValueError(f"{name} must be {COV_DIM}x{COV_DIM}")
            if not np.allclose(m, m.T, atol=1e-9):
                raise ValueError(f"{name} must be symmetric")
            if np.linalg.eigvalsh(symmetrize(m)).min() < -1e-9:
                raise ValueError(f"{name} must be positive semidefinite")

    def sample_process(self, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
        """Draw one 8-vector from N(0, scale * W)."""
        return _sample_gaussian(self.process_cov * scale, rng)

    def sample_estimator(self, rng: np.random.Generator) -> np.ndarray:
        return _sample_gaussian(self.estimator_cov, rng)


@dataclass(frozen=True)
class StateEstimate:
    """Simulated-estimator output: noisy state plus its 8-D uncertainty."""

    state: MavState
    gaussian: GaussianState      # mean = leading 8 state components

    @property
    def position_cov(self) -> np.ndarray:
        return self.gaussian.covariance[0:3, 0:3]


def _sample_gaussian(cov: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    # Eigen-based square root tolerates semidefinite covariances.
    vals, vecs = np.linalg.eigh(symmetrize(cov))
    root = vecs * np.sqrt(np.clip(vals, 0.0, None))
    return root @ rng.standard_normal(cov.shape[0])


def dynamics_step_vec(x: np.ndarray, u: np.ndarray, dt: float,
                      params: DynamicsParams = DynamicsParams()) -> np.ndarray:
    """Forward-Euler step, vectorized over leading axes.

    x: (..., 9) state rows, u: (..., 4) or (4,) control rows.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    g, kd = params.gravity, params.drag_coeff
    p = x[..., 0:3]
    v = x[..., 3:6]
    roll, pitch, yaw = x[..., 6], x[..., 7], x[..., 8]
    roll_cmd, pitch_cmd = u[..., 0], u[..., 1]
    vz_cmd, yaw_rate = u[..., 2], u[..., 3]

    tan_r, tan_p = np.tan(roll), np.tan(pitch)
    sin_y, cos_y = np.sin(yaw), np.cos(yaw)
    ax = g * (tan_p * cos_y + tan_r * sin_y) - kd * v[..., 0]
    ay = g * (tan_p * sin_y - tan_r * cos_y) - kd * v[..., 1]
    az = (vz_cmd - v[..., 2]) / params.tau_z

    out = np.empty_like(x)
    out[..., 0:3] = p + dt * v
    out[..., 3] = v[..., 0] + dt * ax
    out[..., 4] = v[..., 1] + dt * ay
    out[..., 5] = v[..., 2] + dt * az
    lim = params.attitude_limit
    out[..., 6] = np.clip(roll + dt * (roll_cmd - roll) / params.tau_rp, -lim, lim)
    out[..., 7] = np.clip(pitch + dt * (pitch_cmd - pitch) / params.tau_rp, -lim, lim)
    out[..., 8] = yaw + dt * yaw_rate
    return out


def dynamics_step(x: MavState, u: ControlInput, dt: float,
                  params: DynamicsParams = DynamicsParams()) -> MavState:
    """Deterministic discrete-time step of the vehicle model."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    nxt = dynamics_step_vec(x.as_vector(), u.as_vector(), dt, params)
    return MavState.from_vector(nxt)


def simulate_step(x: MavState, u: ControlInput, dt: float, noise: NoiseConfig,
                  rng_seed: int, params: DynamicsParams = DynamicsParams()) -> MavState:
    """dynamics_step plus one additive draw from N(0, W) on (p, v, roll, pitch)."""
    nxt = dynamics_step_vec(x.as_vector(), u.as_vector(), dt, params)
    rng = np.random.default_rng(rng_seed)
    nxt[0:COV_DIM] += noise.sample_process(rng)
    lim = params.attitude_limit
    nxt[6] = np.clip(nxt[6], -lim, lim)
    nxt[7] = np.clip(nxt[7], -lim, lim)
    return MavState.from_vector(nxt)


def estimate_state(true_x: MavState, noise: NoiseConfig, rng_seed: int) -> StateEstimate:
    """Simulated visual-odometry substitute: truth plus configured Gaussian error.

    The reported covariance is exactly the configured estimator
    covariance; yaw is passed through noise-free (it carries no tracked
    uncertainty).
    """
    rng = np.random.default_rng(rng_seed)
    vec = true_x.as_vector()
    vec[0:COV_DIM] += noise.sample_estimator(rng)
    vec[6] = np.clip(vec[6], -math.pi / 2 + 1e-9, math.pi / 2 - 1e-9)
    vec[7] = np.clip(vec[7], -math.pi / 2 + 1e-9, math.pi / 2 - 1e-9)
    state = MavState.from_vector(vec)
    return StateEstimate(state, GaussianState(vec[0:COV_DIM].copy(),
                                              noise.estimator_cov.copy()))


def full_jacobians(x: MavState, u: ControlInput, dt: float,
                   params: DynamicsParams = DynamicsParams()):
    """(A, B): derivatives of the full 9-D Euler step w.r.t. state and control.

    Valid while the attitude clamp is inactive.
    """
    g, kd = params.gravity, params.drag_coeff
    sec2_r = 1.0 / math.cos(x.roll) ** 2
    sec2_p = 1.0 / math.cos(x.pitch) ** 2
    sin_y, cos_y = math.sin(x.yaw), math.cos(x.yaw)
    tan_r, tan_p = math.tan(x.roll), math.tan(x.pitch)

    a = np.eye(STATE_DIM)
    a[0:3, 3:6] = dt * np.eye(3)
    a[3, 3] = a[4, 4] = 1.0 - kd * dt
    a[5, 5] = 1.0 - dt / params.tau_z
    a[3, 6] = dt * g * sin_y * sec2_r
    a[3, 7] = dt * g * cos_y * sec2_p
    a[4, 6] = -dt * g * cos_y * sec2_r
    a[4, 7] = dt * g * sin_y * sec2_p
    a[3, 8] = dt * g * (-tan_p * sin_y + tan_r * cos_y)
    a[4, 8] = dt * g * (tan_p * cos_y + tan_r * sin_y)
    a[6, 6] = 1.0 - dt / params.tau_rp
    a[7, 7] = 1.0 - dt / params.tau_rp

    b = np.zeros((STATE_DIM, 4))
    b[5, 2] = dt / params.tau_z
    b[6, 0] = dt / params.tau_rp
    b[7, 1] = dt / params.tau_rp
    b[8, 3] = dt
    return a, b


def jacobian(x: MavState, u: ControlInput, dt: float,
             params: DynamicsParams = DynamicsParams()) -> np.ndarray:
    """8x8 state-transition Jacobian over (p, v, roll, pitch), yaw held fixed."""
    a, _ = full_jacobians(x, u, dt, params)
    return a[0:COV_DIM, 0:COV_DIM].copy()


def propagate_covariance(gamma0: np.ndarray,
                         trajectory,
                         process_cov: np.ndarray,
                         dt: float,
                         params: DynamicsParams = DynamicsParams()) -> list[np.ndarray]:
    """EKF-style uncertainty propagation along a given trajectory.

    trajectory is a sequence of (MavState, ControlInput) pairs at which
    the Jacobians are evaluated; returns the covariances after each
    step. Input must be symmetric PSD.
    """
    gamma = symmetrize(np.asarray(gamma0, dtype=float))
    if gamma.shape != (COV_DIM, COV_DIM):
        raise ValueError(f"initial covariance must be {COV_DIM}x{COV_DIM}")
    if np.linalg.eigvalsh(gamma).min() < -1e-9:
        raise ValueError("initial covariance must be positive semidefinite")
    w = np.asarray(process_cov, dtype=float)
    out = []
    for state, control in trajectory:
        f = jacobian(state, control, dt, params)
        gamma = symmetrize(f @ gamma @ f.T + w)
        out.append(gamma)
    return out
