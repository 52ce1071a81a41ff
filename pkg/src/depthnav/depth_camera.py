"""Synthetic depth camera: box/plane ray casting plus a range-dependent noise model.

Stands in for a stereo depth sensor. Images store z-depth (distance
along the optical axis, not ray length); 0 is the no-return sentinel.
Pixel (row, col) has camera-frame ray direction
(1, (cx - col)/f, (cy - row)/f): columns grow to the image right, which
is -y in the x-forward/y-left/z-up camera frame, and rows grow downward,
which is -z.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from depthnav.geometry import BoxObstacle, CameraIntrinsics, Pose, rotation_body_to_world, rotation_z

__all__ = [
    "DepthImage",
    "SensorNoiseModel",
    "AxisPlane",
    "render_depth",
    "apply_noise",
    "save_depth_binary",
    "load_depth_binary",
    "save_depth_pgm",
]

_HEADER = struct.Struct("<IIdddd")  # width, height, focal, cx, cy, timestamp
_RAY_EPS = 1e-9


@dataclass(frozen=True)
class DepthImage:
    """height x width grid of metric z-depths with the camera that took it."""

    data: np.ndarray
    intrinsics: CameraIntrinsics
    timestamp: float = 0.0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        object.__setattr__(self, "data", data)
        k = self.intrinsics
        if data.shape != (k.height, k.width):
            raise ValueError("data shape must be (height, width)")
        valid = data[data > 0]
        if valid.size and valid.max() > k.max_range * (1.0 + 1e-5):
            raise ValueError("depth values exceed max_range")

    def valid_mask(self) -> np.ndarray:
        return self.data > 0


@dataclass(frozen=True)
class SensorNoiseModel:
    """Gaussian depth noise, optionally quadratic in range, plus dropouts."""

    sigma_at_1m: float = 0.0
    quadratic: bool = True
    dropout_prob: float = 0.0

    def __post_init__(self):
        if self.sigma_at_1m < 0:
            raise ValueError("sigma_at_1m must be nonnegative")
        if not 0.0 <= self.dropout_prob <= 1.0:
            raise ValueError("dropout_prob must lie in [0, 1]")

    def sigma(self, depth):
        depth = np.asarray(depth, dtype=float)
        if self.quadratic:
            return self.sigma_at_1m * depth**2
        return np.full_like(depth, self.sigma_at_1m)


@dataclass(frozen=True)
class AxisPlane:
    """Infinite axis-aligned plane: points with coordinate[axis] == value."""

    axis: int
    value: float

    def __post_init__(self):
        if self.axis not in (0, 1, 2):
            raise ValueError("axis must be 0, 1 or 2")


def _pixel_ray_directions(intrinsics: CameraIntrinsics) -> np.ndarray:
    """(H*W, 3) camera-frame ray directions with unit forward component."""
    k = intrinsics
    cols = np.arange(k.width, dtype=float)
    rows = np.arange(k.height, dtype=float)
    y = (k.cx - cols)[None, :] / k.focal_length_px   # left positive
    z = (k.cy - rows)[:, None] / k.focal_length_px   # up positive
    dirs = np.empty((k.height, k.width, 3))
    dirs[..., 0] = 1.0
    dirs[..., 1] = np.broadcast_to(y, (k.height, k.width))
    dirs[..., 2] = np.broadcast_to(z, (k.height, k.width))
    return dirs.reshape(-1, 3)


def _ray_box_depths(origin, dirs, box: BoxObstacle, cam_position) -> np.ndarray:
    """Nearest positive hit parameter per ray against a yaw-oriented box."""
    delta = np.asarray(cam_position, dtype=float) - box.center
    yaw = np.arctan2(delta[1], delta[0])  # front face toward the camera
    rot = rotation_z(yaw)
    o_b = rot.T @ (origin - box.center)
    d_b = dirs @ rot  # row-wise rot.T @ dir
    half = box.size / 2.0

    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (-half - o_b) / d_b
        t2 = (half - o_b) / d_b
    near = np.minimum(t1, t2)
    far = np.maximum(t1, t2)
    # Rays parallel to a slab: inside it -> unbounded, outside -> empty.
    parallel = np.abs(d_b) < _RAY_EPS
    inside = np.abs(o_b) <= half
    near = np.where(parallel, np.where(inside, -np.inf, np.inf), near)
    far = np.where(parallel, np.where(inside, np.inf, -np.inf), far)

    t_near = near.max(axis=1)
    t_far = far.min(axis=1)
    hit = (t_far >= t_near) & (t_far > _RAY_EPS)
    t = np.where(t_near > _RAY_EPS, t_near, t_far)
    return np.where(hit, t, np.inf)


def render_depth(camera_pose: Pose, intrinsics: CameraIntrinsics,
                 obstacles=(), walls=()) -> DepthImage:
    """Ray-cast depth image of box obstacles and axis-aligned plane walls.

    Records the nearest hit's z-depth per pixel; misses and hits beyond
    max_range become the 0 sentinel.
    """
    k = intrinsics
    rot = rotation_body_to_world(camera_pose)
    origin = camera_pose.position
    dirs_cam = _pixel_ray_directions(k)
    dirs_world = dirs_cam @ rot.T

    t_best = np.full(dirs_world.shape[0], np.inf)
    reach = k.max_range * float(np.max(np.linalg.norm(dirs_cam, axis=1)))
    for box in obstacles:
        offset = box.center - origin
        dist = float(np.linalg.norm(offset))
        radius = float(np.linalg.norm(box.size)) / 2.0
        if dist - radius > reach:
            continue
        if rot[:, 0] @ offset < -radius:  # entirely behind the image plane
            continue
        t_best = np.minimum(t_best, _ray_box_depths(origin, dirs_world, box, origin))
    for plane in walls:
        d_axis = dirs_world[:, plane.axis]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (plane.value - origin[plane.axis]) / d_axis
        t = np.where((np.abs(d_axis) > _RAY_EPS) & (t > _RAY_EPS), t, np.inf)
        t_best = np.minimum(t_best, t)

    # Ray parameter equals z-depth because the forward component is 1.
    depth = np.where(np.isfinite(t_best) & (t_best <= k.max_range), t_best, 0.0)
    return DepthImage(depth.reshape(k.height, k.width), k, 0.0)


def apply_noise(img: DepthImage, model: SensorNoiseModel, rng_seed: int) -> DepthImage:
    """Perturb depths with the range-dependent noise model; deterministic per seed.

    Noisy values pushed past max_range or below zero become the sentinel,
    as do dropouts.
    """
    rng = np.random.default_rng(rng_seed)
    normals = rng.standard_normal(img.data.shape)
    dropouts = rng.uniform(size=img.data.shape) < model.dropout_prob
    valid = img.valid_mask()
    noisy = img.data + normals * model.sigma(img.data)
    noisy = np.where(valid & ~dropouts, noisy, 0.0)
    noisy = np.where((noisy <= 0.0) | (noisy > img.intrinsics.max_range), 0.0, noisy)
    return DepthImage(noisy, img.intrinsics, img.timestamp)


def save_depth_binary(img: DepthImage, path) -> None:
    """Flat little-endian format: (width u32, height u32, focal f64, cx f64,
    cy f64, timestamp f64) header then row-major f32 depths."""
    k = img.intrinsics
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(k.width, k.height, k.focal_length_px,
                              k.cx, k.cy, img.timestamp))
        fh.write(np.ascontiguousarray(img.data, dtype="<f4").tobytes())


def load_depth_binary(path, max_range: float | None = None) -> DepthImage:
    """Read the flat binary format; max_range is not stored, so it can be
    supplied (default: the largest depth present, at least 1)."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        width, height, focal, cx, cy, timestamp = _HEADER.unpack(header)
        data = np.frombuffer(fh.read(4 * width * height), dtype="<f4")
    data = data.astype(float).reshape(height, width)
    if max_range is None:
        max_range = max(float(data.max()), 1.0)
    data = np.minimum(data, max_range)
    intrinsics = CameraIntrinsics.create(focal, width, height, max_range, cx=cx, cy=cy)
    return DepthImage(data, intrinsics, timestamp)


def save_depth_pgm(img: DepthImage, path) -> None:
    """ASCII PGM dump for eyeballing; depth scaled onto 0..65535."""
    k = img.intrinsics
    scaled = np.round(img.data / k.max_range * 65535).astype(int)
    with open(path, "w") as fh:
        fh.write(f"P2\n{k.width} {k.height}\n65535\n")
        for row in scaled:
            fh.write(" ".join(str(v) for v in row) + "\n")
