"""Multi-view triangulation primitives over virtual pinhole observations.

An observation is a (CameraView, pixel) pair. For the RANSAC hot path the
observation list is packed once into flat arrays so hypothesis scoring is
a single vectorized projection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import BehindCamera, DegenerateGeometry
from ..geometry.crops import CameraView
from ..geometry.cameras import project_pinhole_many, unproject_pinhole

Observation = tuple[CameraView, np.ndarray]

MIN_RAY_ANGLE_RAD = np.deg2rad(0.1)


@dataclass(frozen=True)
class PackedObservations:
    """Flat arrays for N observations (cam_from_rig convention)."""

    rot: np.ndarray      # (N, 3, 3) rotation, camera from rig
    trans: np.ndarray    # (N, 3)
    focal: np.ndarray    # (N, 2) fx, fy
    center: np.ndarray   # (N, 2) cx, cy
    pixels: np.ndarray   # (N, 2)
    origins: np.ndarray  # (N, 3) camera centers in the rig frame
    rays: np.ndarray     # (N, 3) unit observation rays in the rig frame
    camera_ids: tuple[str, ...]

    def __len__(self) -> int:
        return self.pixels.shape[0]


def pack_observations(observations: list[Observation]) -> PackedObservations:
    n = len(observations)
    rot = np.empty((n, 3, 3))
    trans = np.empty((n, 3))
    focal = np.empty((n, 2))
    center = np.empty((n, 2))
    pixels = np.empty((n, 2))
    origins = np.empty((n, 3))
    rays = np.empty((n, 3))
    ids = []
    for i, (view, px) in enumerate(observations):
        rot_cr, t_cr, origin, rot_rc = view.packed()
        rot[i] = rot_cr
        trans[i] = t_cr
        focal[i] = (view.intrinsics.fx, view.intrinsics.fy)
        center[i] = (view.intrinsics.cx, view.intrinsics.cy)
        pixels[i] = np.asarray(px, dtype=float).reshape(2)
        origins[i] = origin
        rays[i] = rot_rc @ unproject_pinhole(pixels[i], view.intrinsics)
        ids.append(view.camera_id)
    return PackedObservations(rot, trans, focal, center, pixels, origins, rays, tuple(ids))


def project_into(packed: PackedObservations, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project (M, 3) rig-frame points into all N observations.

    Returns (pixels (N, M, 2), valid (N, M)); invalid where behind a camera.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    cam = np.einsum("nij,mj->nmi", packed.rot, pts) + packed.trans[:, None, :]
    z = cam[:, :, 2]
    valid = z > 0.0
    safe_z = np.where(valid, z, 1.0)
    px = np.empty(cam.shape[:2] + (2,))
    px[:, :, 0] = packed.center[:, None, 0] + packed.focal[:, None, 0] * cam[:, :, 0] / safe_z
    px[:, :, 1] = packed.center[:, None, 1] + packed.focal[:, None, 1] * cam[:, :, 1] / safe_z
    return px, valid


def reprojection_errors(packed: PackedObservations, points: np.ndarray) -> np.ndarray:
    """Pixel reprojection error of each point in each observation, (N, M).

    Entries are +inf where the point is behind the camera.
    """
    px, valid = project_into(packed, points)
    err = np.linalg.norm(px - packed.pixels[:, None, :], axis=2)
    return np.where(valid, err, np.inf)


def _check_baselines(packed: PackedObservations) -> None:
    dots = np.clip(packed.rays @ packed.rays.T, -1.0, 1.0)
    crosses = np.linalg.norm(
        np.cross(packed.rays[:, None, :], packed.rays[None, :, :]), axis=2
    )
    angles = np.arctan2(crosses, dots)
    if np.max(angles) <= MIN_RAY_ANGLE_RAD:
        raise DegenerateGeometry("observation rays are near-parallel")


def triangulate_dlt(observations: list[Observation] | PackedObservations) -> np.ndarray:
    """Linear (DLT) triangulation of one 3D point from pinhole observations.

    Minimizes the algebraic residual in normalized camera coordinates;
    exact for noiseless consistent input. Raises DegenerateGeometry for
    fewer than two observations or a near-parallel ray bundle.
    """
    packed = observations if isinstance(observations, PackedObservations) else pack_observations(observations)
    n = len(packed)
    if n < 2:
        raise DegenerateGeometry("triangulation needs at least 2 observations")
    _check_baselines(packed)
    xn = (packed.pixels - packed.center) / packed.focal  # normalized coordinates
    a = np.empty((2 * n, 4))
    p = np.concatenate([packed.rot, packed.trans[:, :, None]], axis=2)  # (N, 3, 4)
    a[0::2] = xn[:, 0:1] * p[:, 2, :] - p[:, 0, :]
    a[1::2] = xn[:, 1:2] * p[:, 2, :] - p[:, 1, :]
    _, _, vt = np.linalg.svd(a, full_matrices=False)
    hom = vt[-1]
    if abs(hom[3]) < 1e-12 * np.linalg.norm(hom[:3]):
        raise DegenerateGeometry("triangulated point at infinity")
    return hom[:3] / hom[3]


def reprojection_error(point: np.ndarray, observation: Observation) -> float:
    """Euclidean pixel distance between the observed pixel and the projection."""
    view, px = observation
    cam_pt = view.rig_from_cam.inverse().apply(np.asarray(point, dtype=float))
    proj, valid = project_pinhole_many(cam_pt.reshape(1, 3), view.intrinsics)
    if not valid[0]:
        raise BehindCamera("point behind the observing camera")
    return float(np.linalg.norm(proj[0] - np.asarray(px, dtype=float).reshape(2)))


def triangulate_pairs_midpoint(
    packed: PackedObservations, pair_i: np.ndarray, pair_j: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form midpoint triangulation for many observation pairs at once.

    Returns (points (P, 3), valid (P,)); invalid where rays are near-parallel.
    """
    o1, o2 = packed.origins[pair_i], packed.origins[pair_j]
    d1, d2 = packed.rays[pair_i], packed.rays[pair_j]
    w = o2 - o1
    b = np.sum(d1 * d2, axis=1)
    denom = 1.0 - b * b
    valid = denom > 1e-12
    safe_denom = np.where(valid, denom, 1.0)
    d1w = np.sum(d1 * w, axis=1)
    d2w = np.sum(d2 * w, axis=1)
    s = (d1w - b * d2w) / safe_denom
    t = (b * d1w - d2w) / safe_denom
    points = 0.5 * (o1 + s[:, None] * d1 + o2 + t[:, None] * d2)
    return points, valid
