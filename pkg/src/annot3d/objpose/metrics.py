"""Pose error metrics: Euclidean translation error, geodesic rotation error."""

from __future__ import annotations

import numpy as np

from ..geometry.se3 import SE3Pose


def translation_error(pose_a: SE3Pose, pose_b: SE3Pose) -> float:
    """||t_a - t_b|| in meters."""
    return float(np.linalg.norm(np.asarray(pose_a.t) - np.asarray(pose_b.t)))


def rotation_error(pose_a: SE3Pose, pose_b: SE3Pose) -> float:
    """Geodesic angle of R_a^-1 R_b, in degrees, in [0, 180]."""
    rel = pose_a.rotation().T @ pose_b.rotation()
    cos = 0.5 * (np.trace(rel) - 1.0)
    return float(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))
