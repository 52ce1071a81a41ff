"""Multi-obstacle tracking: association, filtering, and horizon prediction.

Per frame, measurements are associated to tracks by evaluating the
Gaussian density of the measured (position, size) under each track's
constant-velocity prediction, greedily taking the highest densities.
Matched tracks run a linear Kalman filter over (position, velocity) with
a white-acceleration process model and a position-only measurement; size
is filtered separately as a near-static state. Unmatched measurements
spawn tracks; tracks missing too long are dropped.

For the planner, a track is extrapolated over the horizon at constant
velocity with covariance growing by the (capped) velocity covariance,
and its box size is enlarged to the sqrt(3)/2 bounding ellipsoid that
passes through the box corners.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from depthnav.detection import ObstacleMeasurement
from depthnav.geometry import Ellipsoid, GaussianState, symmetrize

__all__ = [
    "Track",
    "ObstaclePrediction",
    "Assignment",
    "TrackerConfig",
    "associate",
    "kf_update",
    "predict_track",
    "track_to_ellipsoid",
    "lifecycle",
    "ObstacleTracker",
    "BOX_TO_ELLIPSOID",
]

BOX_TO_ELLIPSOID = math.sqrt(3.0) / 2.0


@dataclass(frozen=True)
class Track:
    """One tracked obstacle: position/velocity/size estimates.

    pv_cross is the position-velocity cross-covariance of the joint
    filter; keeping it between frames is what makes velocity estimates
    converge at the proper Kalman rate.
    """

    id: int
    position: GaussianState
    velocity: GaussianState
    size: GaussianState
    last_update: float = 0.0
    misses: int = 0
    pv_cross: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))

    def __post_init__(self):
        if np.any(self.size.mean <= 0):
            raise ValueError("track size must be positive")
        object.__setattr__(self, "pv_cross", np.asarray(self.pv_cross, dtype=float))


@dataclass(frozen=True)
class ObstaclePrediction:
    """Constant-velocity forecast of one track over a planning horizon."""

    track_id: int
    positions: np.ndarray        # (N, 3)
    position_covs: np.ndarray    # (N, 3, 3)
    ellipsoids: tuple            # N Ellipsoid instances
    size: np.ndarray             # (3,)
    velocity: np.ndarray         # (3,)


@dataclass(frozen=True)
class Assignment:
    """Result of one association round (indices into the input lists)."""

    matches: tuple               # (track_index, measurement_index) pairs
    unmatched_tracks: tuple
    unmatched_measurements: tuple


@dataclass(frozen=True)
class TrackerConfig:
    pd_threshold: float = 1e-4
    accel_std: float = 2.0            # white-acceleration process noise, m/s^2
    size_process_std: float = 0.01    # per-frame size drift, m
    spawn_vel_std: float = 1.0        # std of a new track's velocity prior, m/s
    max_misses: int = 30
    vel_cov_cap: np.ndarray = field(default_factory=lambda: 0.5 * np.eye(3))

    def __post_init__(self):
        object.__setattr__(self, "vel_cov_cap",
                           np.asarray(self.vel_cov_cap, dtype=float))


def _pdf(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> float:
    """Gaussian density via Cholesky; tolerates tiny determinants."""
    try:
        chol = np.linalg.cholesky(symmetrize(cov))
    except np.linalg.LinAlgError as exc:
        raise ValueError("association covariance not positive definite") from exc
    z = np.linalg.solve(chol, x - mean)
    log_det = 2.0 * np.sum(np.log(np.diag(chol)))
    n = x.shape[0]
    log_pdf = -0.5 * (n * math.log(2.0 * math.pi) + log_det + float(z @ z))
    return math.exp(log_pdf)


def association_density(track: Track, meas: ObstacleMeasurement, dt: float) -> float:
    """Density of the measured (position, size) under the track's prediction."""
    pred_mean = np.concatenate([track.position.mean + track.velocity.mean * dt,
                                track.size.mean])
    pred_cov = np.zeros((6, 6))
    pred_cov[0:3, 0:3] = track.position.covariance + track.velocity.covariance * dt**2
    pred_cov[3:6, 3:6] = track.size.covariance
    meas_vec = np.concatenate([meas.position_world, meas.size_world])
    return _pdf(meas_vec, pred_mean, pred_cov)


def associate(tracks, measurements, dt: float, pd_threshold: float) -> Assignment:
    """Greedy best-first matching on association density.

    Candidate pairs above the threshold are taken in decreasing density
    order (ties broken by lower track id, then lower measurement index);
    each track and measurement is used at most once.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    candidates = []
    for ti, track in enumerate(tracks):
        for mi, meas in enumerate(measurements):
            pd = association_density(track, meas, dt)
            if pd > pd_threshold:
                candidates.append((-pd, track.id, mi, ti))
    candidates.sort()
    used_tracks, used_meas, matches = set(), set(), []
    for _, _, mi, ti in candidates:
        if ti in used_tracks or mi in used_meas:
            continue
        used_tracks.add(ti)
        used_meas.add(mi)
        matches.append((ti, mi))
    matches.sort()
    return Assignment(
        matches=tuple(matches),
        unmatched_tracks=tuple(i for i in range(len(tracks)) if i not in used_tracks),
        unmatched_measurements=tuple(i for i in range(len(measurements))
                                     if i not in used_meas),
    )


def kf_update(track: Track, meas: ObstacleMeasurement, dt: float,
              accel_std: float = 2.0, size_process_std: float = 0.01) -> Track:
    """Predict the track by dt and fuse one measurement.

    Joint (position, velocity) filter with constant-velocity transition
    and white-acceleration process noise; position-only measurement.
    Size runs a separate static-state filter with small process noise.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    for cov in (meas.pos_cov, meas.size_cov):
        if np.linalg.eigvalsh(symmetrize(cov)).min() < -1e-9:
            raise ValueError("measurement covariance must be positive semidefinite")

    mean = np.concatenate([track.position.mean, track.velocity.mean])
    p = np.zeros((6, 6))
    p[0:3, 0:3] = track.position.covariance
    p[3:6, 3:6] = track.velocity.covariance
    p[0:3, 3:6] = track.pv_cross
    p[3:6, 0:3] = track.pv_cross.T

    f = np.eye(6)
    f[0:3, 3:6] = dt * np.eye(3)
    q = np.zeros((6, 6))
    qa = accel_std**2
    q[0:3, 0:3] = qa * dt**4 / 4.0 * np.eye(3)
    q[0:3, 3:6] = qa * dt**3 / 2.0 * np.eye(3)
    q[3:6, 0:3] = q[0:3, 3:6]
    q[3:6, 3:6] = qa * dt**2 * np.eye(3)
    mean = f @ mean
    p = symmetrize(f @ p @ f.T + q)

    h = np.zeros((3, 6))
    h[:, 0:3] = np.eye(3)
    s = p[0:3, 0:3] + meas.pos_cov
    k = np.linalg.solve(s.T, (p @ h.T).T).T
    mean = mean + k @ (meas.position_world - mean[0:3])
    ikh = np.eye(6) - k @ h
    p = symmetrize(ikh @ p @ ikh.T + k @ meas.pos_cov @ k.T)  # Joseph form

    s_cov = track.size.covariance + size_process_std**2 * np.eye(3)
    s_gain = np.linalg.solve((s_cov + meas.size_cov).T, s_cov.T).T
    s_mean = track.size.mean + s_gain @ (meas.size_world - track.size.mean)
    i_g = np.eye(3) - s_gain
    s_cov = symmetrize(i_g @ s_cov @ i_g.T + s_gain @ meas.size_cov @ s_gain.T)
    s_mean = np.maximum(s_mean, 1e-3)  # sizes stay positive

    return Track(
        id=track.id,
        position=GaussianState(mean[0:3], p[0:3, 0:3]),
        velocity=GaussianState(mean[3:6], p[3:6, 3:6]),
        size=GaussianState(s_mean, s_cov),
        last_update=meas.timestamp,
        misses=0,
        pv_cross=p[0:3, 3:6],
    )


def _cap_covariance(cov: np.ndarray, cap: np.ndarray) -> np.ndarray:
    """Shrink cov so its diagonal never exceeds cap's, preserving PSD.

    Rows/columns are rescaled by sqrt(cap_ii / cov_ii) where the
    diagonal is over the cap, which also shrinks every off-diagonal
    entry proportionally.
    """
    d = np.diag(cov)
    cap_d = np.diag(cap)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(d > cap_d, np.sqrt(cap_d / np.where(d > 0, d, 1.0)), 1.0)
    return symmetrize(cov * np.outer(scale, scale))


def track_to_ellipsoid(track: Track, bearing_to_mav: float) -> Ellipsoid:
    """Bounding ellipsoid through the box corners: semi-axes sqrt(3)/2
    times the box dimensions, length axis pointing along the
    obstacle-to-camera bearing."""
    if np.any(track.size.mean <= 0):
        raise ValueError("track size must be positive")
    return Ellipsoid(center=track.position.mean.copy(),
                     semi_axes=BOX_TO_ELLIPSOID * track.size.mean,
                     yaw=bearing_to_mav)


def predict_track(track: Track, dt: float, n_steps: int,
                  vel_cov_cap: np.ndarray,
                  bearing_to_mav: float = 0.0) -> ObstaclePrediction:
    """Constant-velocity forecast with growing position uncertainty.

    Velocity covariance is capped before use so a noisy velocity
    estimate cannot blow up the predicted uncertainty; size is constant.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    vel_cov = _cap_covariance(track.velocity.covariance,
                              np.asarray(vel_cov_cap, dtype=float))
    positions = np.empty((n_steps, 3))
    covs = np.empty((n_steps, 3, 3))
    pos = track.position.mean.copy()
    cov = track.position.covariance.copy()
    axes = BOX_TO_ELLIPSOID * track.size.mean
    ellipsoids = []
    for k in range(n_steps):
        pos = pos + track.velocity.mean * dt
        cov = symmetrize(cov + vel_cov * dt**2)
        positions[k] = pos
        covs[k] = cov
        ellipsoids.append(Ellipsoid(pos.copy(), axes.copy(), bearing_to_mav))
    return ObstaclePrediction(
        track_id=track.id,
        positions=positions,
        position_covs=covs,
        ellipsoids=tuple(ellipsoids),
        size=track.size.mean.copy(),
        velocity=track.velocity.mean.copy(),
    )


def lifecycle(tracks, assignment: Assignment, measurements,
              config: TrackerConfig, next_id: int):
    """Spawn tracks from unmatched measurements, age and drop stale tracks.

    Matched tracks are passed through as-is (the caller updates them);
    returns (tracks, next_id).
    """
    out = list(tracks)
    for ti in assignment.unmatched_tracks:
        out[ti] = replace(out[ti], misses=out[ti].misses + 1)
    out = [t for t in out if t.misses <= config.max_misses]
    for mi in assignment.unmatched_measurements:
        meas = measurements[mi]
        out.append(Track(
            id=next_id,
            position=GaussianState(meas.position_world.copy(), meas.pos_cov.copy()),
            velocity=GaussianState(np.zeros(3), config.spawn_vel_std**2 * np.eye(3)),
            size=GaussianState(meas.size_world.copy(), meas.size_cov.copy()),
            last_update=meas.timestamp,
            misses=0,
        ))
        next_id += 1
    return out, next_id


class ObstacleTracker:
    """Owns the track list and applies one associate/update/lifecycle
    round per frame. Single-owner state: not thread-safe by design."""

    def __init__(self, config: TrackerConfig = TrackerConfig()):
        self.config = config
        self.tracks: list[Track] = []
        self.next_id = 0
        self._last_time: float | None = None

    def step(self, measurements, t: float, nominal_dt: float = 1.0 / 60.0) -> None:
        dt = nominal_dt if self._last_time is None else max(t - self._last_time, 1e-6)
        self._last_time = t
        assignment = associate(self.tracks, measurements, dt, self.config.pd_threshold)
        updated = list(self.tracks)
        for ti, mi in assignment.matches:
            track = updated[ti]
            track_dt = max(t - track.last_update, 1e-6)
            updated[ti] = kf_update(track, measurements[mi], track_dt,
                                    self.config.accel_std,
                                    self.config.size_process_std)
        self.tracks, self.next_id = lifecycle(updated, assignment, measurements,
                                              self.config, self.next_id)
