"""Obstacle detection from single depth images via column depth histograms.

Pipeline: the depth image is collapsed into a histogram map whose rows
are depth bins and columns are image columns. Bins with enough support
for an object of at least a threshold height become points of interest,
neighboring points are grouped, and each group yields a box measurement:
horizontal position/extent from the histogram map, vertical
position/extent from the depth image, then a world-frame transform using
the vehicle pose estimate.

Pixel coordinates are re-centered at the principal point before any of
the projection formulas apply, with u = cx - column (left positive) and
h = cy - row (up positive) so that signs match the x-forward/y-left/z-up
camera frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from depthnav.depth_camera import DepthImage
from depthnav.geometry import Pose, rotation_body_to_world, size_compensation_matrix, symmetrize

__all__ = [
    "UDepthMap",
    "UDepthBox",
    "ObstacleMeasurement",
    "DetectorConfig",
    "build_udepth",
    "poi_threshold",
    "extract_boxes",
    "box_from_udepth",
    "vertical_extent",
    "to_world_measurement",
    "detect_obstacles",
    "measurement_to_record",
    "measurement_from_record",
    "RECORD_HEADER",
]


@dataclass(frozen=True)
class UDepthMap:
    """Histogram of depths per image column: bins[b, u] counts pixels of
    column u whose depth lies in [b*bin_depth, (b+1)*bin_depth)."""

    bins: np.ndarray
    bin_depth: float
    n_bins: int

    def __post_init__(self):
        bins = np.asarray(self.bins)
        object.__setattr__(self, "bins", bins)
        if bins.shape[0] != self.n_bins:
            raise ValueError("bins row count must equal n_bins")
        if np.any(bins < 0):
            raise ValueError("histogram counts must be nonnegative")

    @property
    def width(self) -> int:
        return self.bins.shape[1]


@dataclass(frozen=True)
class UDepthBox:
    """Bounding rectangle of one histogram-map group.

    u_min/u_max are principal-point-relative column coordinates (left
    positive, half-pixel edges); d_near/d_far are the near/far depth-bin
    edges in meters.
    """

    u_min: float
    u_max: float
    d_near: float
    d_far: float

    def __post_init__(self):
        if not self.u_min < self.u_max:
            raise ValueError("u_min must be less than u_max")
        if not self.d_near < self.d_far:
            raise ValueError("d_near must be less than d_far")


@dataclass(frozen=True)
class ObstacleMeasurement:
    """World-frame box measurement with position and size uncertainty."""

    position_world: np.ndarray
    size_world: np.ndarray
    pos_cov: np.ndarray
    size_cov: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        p = np.asarray(self.position_world, dtype=float)
        s = np.asarray(self.size_world, dtype=float)
        pc = np.asarray(self.pos_cov, dtype=float)
        sc = np.asarray(self.size_cov, dtype=float)
        object.__setattr__(self, "position_world", p)
        object.__setattr__(self, "size_world", s)
        object.__setattr__(self, "pos_cov", pc)
        object.__setattr__(self, "size_cov", sc)
        if np.any(s <= 0):
            raise ValueError("measured sizes must be positive")
        for m in (pc, sc):
            if m.shape != (3, 3) or np.linalg.eigvalsh(symmetrize(m)).min() < -1e-9:
                raise ValueError("covariances must be 3x3 positive semidefinite")


@dataclass(frozen=True)
class DetectorConfig:
    """Detection knobs.

    n_bins None picks 0.1 m bins for the camera's range. alpha/beta set
    the body-frame measurement noise model: forward std alpha*d^2,
    lateral/vertical std beta*d, applied to both position and size.
    """

    n_bins: int | None = None
    t_height: float = 0.3
    min_group_cells: int = 4
    min_thickness: float = 0.1
    alpha: float = 0.02
    beta: float = 0.01

    def bins_for(self, max_range: float) -> int:
        if self.n_bins is not None:
            return self.n_bins
        return max(1, round(max_range / 0.1))


def build_udepth(img: DepthImage, n_bins: int) -> UDepthMap:
    """Column depth histogram of a depth image; sentinels excluded."""
    if n_bins < 1:
        raise ValueError("n_bins must be at least 1")
    k = img.intrinsics
    bin_depth = k.max_range / n_bins
    valid = img.valid_mask()
    rows, cols = np.nonzero(valid)
    idx = np.minimum((img.data[rows, cols] / bin_depth).astype(int), n_bins - 1)
    counts = np.bincount(idx * k.width + cols, minlength=n_bins * k.width)
    return UDepthMap(counts.reshape(n_bins, k.width), bin_depth, n_bins)


def poi_threshold(focal: float, t_height: float, d_bin: float) -> float:
    """Pixel-count threshold above which a histogram bin is interesting:
    the projected height of a t_height-tall object at depth d_bin."""
    if d_bin <= 0:
        raise ValueError("bin depth must be positive")
    return focal * t_height / d_bin


def extract_boxes(umap: UDepthMap, focal: float, t_height: float, *,
                  cx: float | None = None,
                  min_group_cells: int = 4) -> list[UDepthBox]:
    """Group interesting histogram bins into bounding rectangles.

    Cells exceeding the per-row threshold are flood-filled with
    8-connectivity; groups smaller than min_group_cells are dropped.
    cx defaults to the map's center column.
    """
    if cx is None:
        cx = (umap.width - 1) / 2.0
    centers = (np.arange(umap.n_bins) + 0.5) * umap.bin_depth
    thresholds = focal * t_height / centers
    mask = umap.bins > thresholds[:, None]
    labels, n_groups = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    boxes = []
    for idx in range(1, n_groups + 1):
        group_rows, group_cols = np.nonzero(labels == idx)
        if group_rows.size < min_group_cells:
            continue
        d_near = group_rows.min() * umap.bin_depth
        d_far = (group_rows.max() + 1) * umap.bin_depth
        c_min, c_max = group_cols.min(), group_cols.max()
        boxes.append(UDepthBox(u_min=cx - c_max - 0.5, u_max=cx - c_min + 0.5,
                               d_near=d_near, d_far=d_far))
    boxes.sort(key=lambda b: (b.d_near, b.u_min))
    return boxes


def box_from_udepth(box: UDepthBox, focal: float):
    """Horizontal body-frame position and extent of a histogram box.

    Returns (x, y, length, width): forward position at the far depth
    edge, lateral center from the column midpoint, thickness as twice
    the visible depth spread (assumes the far half of the obstacle is
    hidden), width from the column span.
    """
    x = box.d_far
    y = (box.u_min + box.u_max) * box.d_far / (2.0 * focal)
    length = 2.0 * (box.d_far - box.d_near)
    width = (box.u_max - box.u_min) * box.d_far / focal
    return x, y, length, width


def vertical_extent(img: DepthImage, box: UDepthBox, focal: float,
                    cx: float | None = None, cy: float | None = None):
    """Vertical body-frame position and extent of a detected obstacle.

    Scans the depth-image pixels inside the box's column span whose
    depth lies within [d_near, d_near + length] and converts the row
    span to (z, height). Raises when no pixel qualifies.
    """
    k = img.intrinsics
    cx = k.cx if cx is None else cx
    cy = k.cy if cy is None else cy
    col_lo = max(0, math.ceil(cx - box.u_max))
    col_hi = min(k.width - 1, math.floor(cx - box.u_min))
    if col_hi < col_lo:
        raise ValueError("box column span lies outside the image")
    _, _, length, _ = box_from_udepth(box, focal)
    patch = img.data[:, col_lo:col_hi + 1]
    qualifies = (patch > 0) & (patch >= box.d_near) & (patch <= box.d_near + length)
    row_any = np.nonzero(qualifies.any(axis=1))[0]
    if row_any.size == 0:
        raise ValueError("no depth pixels inside the detected box region")
    r_min, r_max = row_any.min(), row_any.max()
    h_top = cy - r_min + 0.5   # up positive
    h_bot = cy - r_max - 0.5
    z = (h_top + h_bot) * box.d_far / (2.0 * focal)
    height = (h_top - h_bot) * box.d_far / focal
    return z, height


def to_world_measurement(body_position, body_size, pose: Pose,
                         mav_position_cov, body_pos_cov, body_size_cov,
                         timestamp: float = 0.0) -> ObstacleMeasurement:
    """Transform a body-frame box measurement into the world frame.

    Position covariance is conjugated by the body-to-world rotation and
    inflated by the vehicle's own position uncertainty; size is mapped
    through the attitude compensation matrix.
    """
    rot = rotation_body_to_world(pose)
    comp = size_compensation_matrix(pose)
    p_world = rot @ np.asarray(body_position, dtype=float) + pose.position
    s_world = comp @ np.asarray(body_size, dtype=float)
    pos_cov = symmetrize(rot @ np.asarray(body_pos_cov, dtype=float) @ rot.T
                         + np.asarray(mav_position_cov, dtype=float))
    size_cov = symmetrize(comp @ np.asarray(body_size_cov, dtype=float) @ comp.T)
    return ObstacleMeasurement(p_world, s_world, pos_cov, size_cov, timestamp)


def detect_obstacles(img: DepthImage, config: DetectorConfig = DetectorConfig(),
                     pose: Pose | None = None,
                     mav_position_cov: np.ndarray | None = None) -> list[ObstacleMeasurement]:
    """Full single-image pipeline: histogram, group, measure, transform.

    pose defaults to the identity (camera at the world origin);
    detections whose vertical extent cannot be established are skipped.
    """
    k = img.intrinsics
    pose = Pose(np.zeros(3)) if pose is None else pose
    if mav_position_cov is None:
        mav_position_cov = np.zeros((3, 3))
    umap = build_udepth(img, config.bins_for(k.max_range))
    boxes = extract_boxes(umap, k.focal_length_px, config.t_height,
                          cx=k.cx, min_group_cells=config.min_group_cells)
    measurements = []
    for box in boxes:
        x, y, length, width = box_from_udepth(box, k.focal_length_px)
        try:
            z, height = vertical_extent(img, box, k.focal_length_px)
        except ValueError:
            continue
        length = max(length, config.min_thickness)
        depth = x
        pos_cov = np.diag([(config.alpha * depth**2) ** 2,
                           (config.beta * depth) ** 2,
                           (config.beta * depth) ** 2])
        size_cov = pos_cov.copy()
        measurements.append(to_world_measurement(
            (x, y, z), (length, width, height), pose,
            mav_position_cov, pos_cov, size_cov, img.timestamp))
    return measurements


RECORD_HEADER = ("# timestamp x y z l w h "
                 "pcov_xx pcov_yy pcov_zz scov_xx scov_yy scov_zz")


def measurement_to_record(m: ObstacleMeasurement) -> str:
    """One measurement as a whitespace-separated text line (covariance
    diagonals only)."""
    fields = [m.timestamp, *m.position_world, *m.size_world,
              *np.diag(m.pos_cov), *np.diag(m.size_cov)]
    return " ".join(repr(float(v)) for v in fields)


def measurement_from_record(line: str) -> ObstacleMeasurement:
    vals = [float(tok) for tok in line.split()]
    if len(vals) != 13:
        raise ValueError("detection record must have 13 fields")
    return ObstacleMeasurement(
        position_world=np.array(vals[1:4]),
        size_world=np.array(vals[4:7]),
        pos_cov=np.diag(vals[7:10]),
        size_cov=np.diag(vals[10:13]),
        timestamp=vals[0],
    )
