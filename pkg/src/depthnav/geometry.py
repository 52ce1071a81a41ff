"""Shared geometric and probabilistic primitives.

Frames:
    World: x/y horizontal, z up, right-handed.
    Body (= camera): x forward along the optical axis, y left, z up.
    Euler convention is Z-Y-X: yaw about z, then pitch about the new y,
    then roll about the new x.

All types are immutable value types; every function here is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "CameraIntrinsics",
    "Pose",
    "GaussianState",
    "Ellipsoid",
    "BoxObstacle",
    "rotation_z",
    "rotation_body_to_world",
    "body_to_world",
    "world_to_body",
    "size_compensation_matrix",
    "gaussian_pdf",
    "symmetrize",
    "ellipsoid_surface_distance",
]

_DEGENERATE_ATTITUDE_TOL = 1e-6


def symmetrize(m: np.ndarray) -> np.ndarray:
    """(M + M^T)/2, used after every covariance transform to kill drift."""
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole depth-camera model.

    focal_length_px applies to both axes (square pixels); cx/cy is the
    principal point in pixel coordinates (pixel centers at integer
    coordinates, so a width-160 image has its optical axis at 79.5).
    h_fov/v_fov are kept as explicit fields because the planner's view
    frustum is built from them; by default they are derived from the
    focal length and image size so projection and frustum agree.
    """

    focal_length_px: float
    width: int
    height: int
    cx: float
    cy: float
    max_range: float
    h_fov: float
    v_fov: float

    def __post_init__(self):
        if self.focal_length_px <= 0:
            raise ValueError("focal length must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be at least 1x1")
        if self.max_range <= 0:
            raise ValueError("max_range must be positive")
        for fov in (self.h_fov, self.v_fov):
            if not 0.0 < fov < math.pi:
                raise ValueError("fov angles must lie in (0, pi)")

    @classmethod
    def create(cls, focal_length_px, width, height, max_range,
               cx=None, cy=None, h_fov=None, v_fov=None):
        """Build intrinsics, deriving principal point and FOV when omitted."""
        cx = (width - 1) / 2.0 if cx is None else cx
        cy = (height - 1) / 2.0 if cy is None else cy
        if h_fov is None:
            h_fov = 2.0 * math.atan2(width / 2.0, focal_length_px)
        if v_fov is None:
            v_fov = 2.0 * math.atan2(height / 2.0, focal_length_px)
        return cls(float(focal_length_px), int(width), int(height),
                   float(cx), float(cy), float(max_range),
                   float(h_fov), float(v_fov))

    @classmethod
    def realsense_like(cls, width=160, height=120, max_range=5.0):
        """Stereo-depth-camera defaults: 386 px focal at 640x480, scaled."""
        focal = 386.0 * width / 640.0
        return cls.create(focal, width, height, max_range)


@dataclass(frozen=True)
class Pose:
    """Position plus Z-Y-X Euler attitude of the body frame in the world."""

    position: np.ndarray
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        if self.position.shape != (3,):
            raise ValueError("position must be a 3-vector")
        if abs(self.roll) >= math.pi / 2 or abs(self.pitch) >= math.pi / 2:
            raise ValueError("roll/pitch must lie strictly inside (-pi/2, pi/2)")


@dataclass(frozen=True)
class GaussianState:
    """Mean and covariance of a Gaussian random vector."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.covariance, dtype=float)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        n = mean.shape[0]
        if mean.ndim != 1 or cov.shape != (n, n):
            raise ValueError("covariance shape must match mean dimension")
        if not np.allclose(cov, cov.T, atol=1e-9, rtol=0.0):
            raise ValueError("covariance must be symmetric to 1e-9")
        eigvals = np.linalg.eigvalsh(symmetrize(cov))
        if eigvals.min() < -1e-9:
            raise ValueError("covariance must be positive semidefinite")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class Ellipsoid:
    """Ellipsoid with semi-axes (a, b, c) and a yaw rotation about world z.

    The a-axis points along (cos yaw, sin yaw, 0) in the world frame.
    """

    center: np.ndarray
    semi_axes: np.ndarray
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "semi_axes", np.asarray(self.semi_axes, dtype=float))
        if self.center.shape != (3,) or self.semi_axes.shape != (3,):
            raise ValueError("center and semi_axes must be 3-vectors")
        if np.any(self.semi_axes <= 0):
            raise ValueError("semi-axes must be positive")

    def rotation(self) -> np.ndarray:
        """Principal-axes-to-world rotation (columns are the axes)."""
        return rotation_z(self.yaw)

    def shape_matrix(self, margin: float = 0.0) -> np.ndarray:
        """Quadratic-form matrix Q with x inside iff (x-c)^T Q (x-c) <= 1.

        margin inflates every semi-axis, e.g. by a vehicle radius.
        """
        r = self.rotation()
        d = np.diag(1.0 / (self.semi_axes + margin) ** 2)
        return symmetrize(r @ d @ r.T)

    def shape_matrix_sqrt(self, margin: float = 0.0) -> np.ndarray:
        """Symmetric square root of shape_matrix (same eigenvectors)."""
        r = self.rotation()
        d = np.diag(1.0 / (self.semi_axes + margin))
        return symmetrize(r @ d @ r.T)

    def contains(self, point, margin: float = 0.0) -> bool:
        d = np.asarray(point, dtype=float) - self.center
        return float(d @ self.shape_matrix(margin) @ d) <= 1.0


@dataclass(frozen=True)
class BoxObstacle:
    """Axis-sized box obstacle: center, (length, width, height), velocity.

    The box has no intrinsic yaw; the renderer orients its front face
    toward the camera, mirroring how a person presents a similar
    silhouette from any bearing.
    """

    center: np.ndarray
    size: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "size", np.asarray(self.size, dtype=float))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float))
        if self.center.shape != (3,) or self.size.shape != (3,) or self.velocity.shape != (3,):
            raise ValueError("center, size and velocity must be 3-vectors")
        if np.any(self.size <= 0):
            raise ValueError("box dimensions must be positive")


def rotation_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_body_to_world(pose: Pose) -> np.ndarray:
    """R mapping body-frame vectors into the world frame (Z-Y-X Euler)."""
    cr, sr = math.cos(pose.roll), math.sin(pose.roll)
    cp, sp = math.cos(pose.pitch), math.sin(pose.pitch)
    cy, sy = math.cos(pose.yaw), math.sin(pose.yaw)
    return np.array([
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ])


def body_to_world(p_body, pose: Pose) -> np.ndarray:
    """Transform a body-frame point into the world frame."""
    p_body = np.asarray(p_body, dtype=float)
    return rotation_body_to_world(pose) @ p_body + pose.position


def world_to_body(p_world, pose: Pose) -> np.ndarray:
    """Inverse of body_to_world."""
    p_world = np.asarray(p_world, dtype=float)
    return rotation_body_to_world(pose).T @ (p_world - pose.position)


def size_compensation_matrix(pose: Pose) -> np.ndarray:
    """diag(cos pitch, cos roll, 1/(cos pitch * cos roll)).

    Maps body-frame box dimensions to world-frame dimensions,
    compensating the tilt of the camera. Degenerate near +-90 degrees.
    """
    cp = math.cos(pose.pitch)
    cr = math.cos(pose.roll)
    if cp * cr < _DEGENERATE_ATTITUDE_TOL:
        raise ValueError("attitude too close to gimbal lock for size compensation")
    return np.diag([cp, cr, 1.0 / (cp * cr)])


def gaussian_pdf(x, mean, cov) -> float:
    """Multivariate normal density of x under N(mean, cov).

    Raises on (numerically) singular covariance.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    n = x.shape[0]
    det = np.linalg.det(cov)
    if det < 1e-18:
        raise ValueError("covariance is singular or not positive definite")
    diff = x - mean
    maha = float(diff @ np.linalg.solve(cov, diff))
    norm = (2.0 * math.pi) ** (-n / 2.0) / math.sqrt(det)
    return norm * math.exp(-0.5 * maha)


def _axis_foot_residual(t: float, aq_sq: np.ndarray, a_sq: np.ndarray) -> float:
    return float(np.sum(aq_sq / (a_sq + t) ** 2)) - 1.0


def ellipsoid_surface_distance(point, ellipsoid: Ellipsoid) -> float:
    """Euclidean distance from a point to the ellipsoid surface.

    Signed: negative when the point is inside. The closest-point
    parameter t solves sum((a_i q_i)^2 / (a_i^2 + t)^2) = 1 on
    (-min(a)^2, inf); bisection brackets the root and Newton polishes it.
    Components of the point that land exactly on a principal plane are
    nudged by 1e-12 — the distance function is 1-Lipschitz, so the
    result changes by no more than the nudge.
    """
    e = ellipsoid
    q = e.rotation().T @ (np.asarray(point, dtype=float) - e.center)
    a = e.semi_axes
    if np.all(np.abs(q) < 1e-12):
        return -float(a.min())
    # Nudge exact zeros off the degenerate set.
    q = np.where(np.abs(q) < 1e-12, 1e-12, q)
    a_sq = a**2
    aq_sq = (a * q) ** 2
    inside = float(np.sum((q / a) ** 2)) < 1.0

    if inside:
        lo = -float(a_sq.min()) * (1.0 - 1e-14)
        hi = 0.0
    else:
        lo = 0.0
        hi = math.sqrt(float(aq_sq.sum())) + float(a_sq.max())
        while _axis_foot_residual(hi, aq_sq, a_sq) > 0.0:
            hi *= 2.0
    f_lo = _axis_foot_residual(lo, aq_sq, a_sq)
    if f_lo < 0.0:
        # q sits on the degenerate boundary despite the nudge; the root
        # is numerically at the bracket edge.
        t = lo
    else:
        for _ in range(200):
            t = 0.5 * (lo + hi)
            f = _axis_foot_residual(t, aq_sq, a_sq)
            if f > 0.0:
                lo = t
            else:
                hi = t
            if hi - lo < 1e-15 * (1.0 + abs(t)):
                break
        t = 0.5 * (lo + hi)
        # Newton polish; derivative is strictly negative on the bracket.
        for _ in range(10):
            f = _axis_foot_residual(t, aq_sq, a_sq)
            df = float(np.sum(-2.0 * aq_sq / (a_sq + t) ** 3))
            if df == 0.0:
                break
            step = f / df
            t_new = t - step
            if not lo <= t_new <= hi:
                break
            t = t_new
            if abs(step) < 1e-15 * (1.0 + abs(t)):
                break
    foot = a_sq * q / (a_sq + t)
    dist = float(np.linalg.norm(foot - q))
    return -dist if inside else dist
