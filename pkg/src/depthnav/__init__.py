"""Vision-based collision avoidance for a simulated quadrotor.

The library covers the full closed loop: synthetic depth-image sensing,
column-histogram obstacle detection, Kalman tracking with uncertainty,
chance-constrained model predictive control, and scenario/Monte-Carlo
harnesses that validate the probabilistic safety guarantee.
"""

from depthnav.geometry import (
    BoxObstacle,
    CameraIntrinsics,
    Ellipsoid,
    GaussianState,
    Pose,
    body_to_world,
    ellipsoid_surface_distance,
    gaussian_pdf,
    size_compensation_matrix,
)
from depthnav.special import erf, erf_inv

__version__ = "0.1.0"
