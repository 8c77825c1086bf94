"""Deterministic headless test harness for low-speed autonomous shuttles.

Simulated lidar in a primitive scene, NDT mapping and scan-matching
localization, pure pursuit path following on a kinematic bicycle, and OSM
route extraction.
"""

from .geometry import Point3, PointCloud, Pose6, compose, invert, normalize_angle, pose_to_transform, transform_to_pose
from .ndt import NdtGrid, RegistrationParams, ScanMatchResult, build_grid, cell_density, register, score, score_gradient

__version__ = "0.1.0"
