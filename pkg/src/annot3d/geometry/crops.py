"""Perspective cropping: virtual pinhole cameras carved out of a fisheye view.

A crop shares the source camera's optical center (pure rotation, no
baseline) and points its forward axis at a 3D target, so local detections
can be processed free of fisheye distortion. Only point warping is
implemented; detections are points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import BehindCamera, InvalidInput, OutsideCrop
from .cameras import PinholeIntrinsics, project_pinhole_many, unproject_fisheye, unproject_fisheye_many
from .rig import CameraRig
from .se3 import SE3Pose, quat_conjugate, quat_from_axis_angle, quat_to_matrix

DEFAULT_CROP_SIZE = 256
DEFAULT_CROP_FOV_DEG = 60.0


@dataclass(frozen=True, eq=False)
class CameraView:
    """A pinhole camera posed in the rig frame (real or virtual)."""

    camera_id: str
    intrinsics: PinholeIntrinsics
    rig_from_cam: SE3Pose

    def __post_init__(self):
        object.__setattr__(self, "_packed", None)

    def packed(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(rot cam-from-rig, t cam-from-rig, camera center, rot rig-from-cam),
        computed once per view (the triangulation hot path reuses views)."""
        if self._packed is None:
            rot_rc = self.rig_from_cam.rotation()
            rot_cr = rot_rc.T.copy()
            t_cr = -rot_cr @ self.rig_from_cam.t
            for arr in (rot_cr, t_cr):
                arr.setflags(write=False)
            object.__setattr__(self, "_packed", (rot_cr, t_cr, self.rig_from_cam.t, rot_rc))
        return self._packed


@dataclass(frozen=True, eq=False)
class PerspectiveCrop:
    """Virtual pinhole camera: source camera id, crop intrinsics, and the
    rotation taking source-camera coordinates to crop-camera coordinates."""

    source_camera: str
    virtual_intrinsics: PinholeIntrinsics
    virtual_rotation: np.ndarray  # quaternion, crop frame from source frame

    def __post_init__(self):
        q = np.array(self.virtual_rotation, dtype=float).reshape(4)
        if abs(np.linalg.norm(q) - 1.0) > 1e-9:
            raise InvalidInput("virtual_rotation must be a unit quaternion")
        q.setflags(write=False)
        object.__setattr__(self, "virtual_rotation", q)
        object.__setattr__(self, "rotation_matrix", quat_to_matrix(q))


def pinhole_focal_for_fov(crop_size: int, fov_deg: float) -> float:
    """Focal length such that `fov_deg` spans `crop_size` pixels."""
    if not 0.0 < fov_deg < 180.0:
        raise InvalidInput("crop fov must be in (0, 180) degrees")
    return 0.5 * crop_size / np.tan(0.5 * np.deg2rad(fov_deg))


def crop_fov_deg(
    extent_m: float,
    distance_m: float,
    *,
    padding: float = 1.5,
    min_fov_deg: float = DEFAULT_CROP_FOV_DEG,
    max_fov_deg: float = 100.0,
) -> float:
    """Field of view wide enough to fit `padding` x the target extent.

    Falls back to `min_fov_deg` for degenerate extents, so the default
    crop is 60 deg.
    """
    if distance_m <= 0.0:
        raise InvalidInput("target distance must be positive")
    if extent_m <= 0.0:
        return min_fov_deg
    fov = np.rad2deg(2.0 * np.arctan2(padding * extent_m, distance_m))
    return float(np.clip(fov, min_fov_deg, max_fov_deg))


def make_perspective_crop(
    camera_id: str,
    rig: CameraRig,
    target_rig: np.ndarray,
    crop_size: int = DEFAULT_CROP_SIZE,
    fov_deg: float = DEFAULT_CROP_FOV_DEG,
) -> PerspectiveCrop:
    """Crop camera looking at `target_rig` (rig-frame meters) from `camera_id`.

    The crop's forward axis passes through the target; the rotation is the
    shortest arc from the source optical axis, so a target on the source
    axis yields the identity rotation.
    """
    cam = rig.camera(camera_id)
    x_cam = cam.rig_from_cam.inverse().apply(np.asarray(target_rig, dtype=float))
    norm = np.linalg.norm(x_cam)
    if norm == 0.0:
        raise BehindCamera("crop target coincides with the camera center")
    d = x_cam / norm
    theta = np.arctan2(np.hypot(d[0], d[1]), d[2])
    if theta >= cam.intrinsics.max_angle_rad:
        raise BehindCamera("crop target outside the modeled fisheye domain")
    axis = np.cross(np.array([0.0, 0.0, 1.0]), d)
    sin_a = np.linalg.norm(axis)
    if sin_a < 1e-15:
        q_src_from_crop = np.array([1.0, 0.0, 0.0, 0.0])
    else:
        q_src_from_crop = quat_from_axis_angle(axis, float(np.arctan2(sin_a, d[2])))
    focal = pinhole_focal_for_fov(crop_size, fov_deg)
    intr = PinholeIntrinsics(
        fx=focal, fy=focal, cx=0.5 * crop_size, cy=0.5 * crop_size, width=crop_size, height=crop_size
    )
    return PerspectiveCrop(
        source_camera=camera_id,
        virtual_intrinsics=intr,
        virtual_rotation=quat_conjugate(q_src_from_crop),
    )


def warp_detections_to_crop_many(
    pixels: np.ndarray, crop: PerspectiveCrop, rig: CameraRig
) -> tuple[np.ndarray, np.ndarray]:
    """Batch warp of (N, 2) source-fisheye pixels; returns (pixels, valid).

    Rows are invalid where the source pixel does not unproject, the
    rotated ray points away from the crop camera, or the warped point
    leaves the crop bounds.
    """
    cam = rig.camera(crop.source_camera)
    rays, valid = unproject_fisheye_many(pixels, cam.intrinsics)
    rays = np.where(valid[:, None], rays, np.array([0.0, 0.0, 1.0]))
    rays_crop = rays @ crop.rotation_matrix.T
    in_front = rays_crop[:, 2] > 0.0
    safe = np.where(in_front[:, None], rays_crop, np.array([0.0, 0.0, 1.0]))
    px, _ = project_pinhole_many(safe, crop.virtual_intrinsics)
    intr = crop.virtual_intrinsics
    ok = (
        valid
        & in_front
        & (px[:, 0] >= 0.0)
        & (px[:, 0] < intr.width)
        & (px[:, 1] >= 0.0)
        & (px[:, 1] < intr.height)
    )
    px[~ok] = np.nan
    return px, ok


def warp_detection_to_crop(pixel: np.ndarray, crop: PerspectiveCrop, rig: CameraRig) -> np.ndarray:
    """Map a source-fisheye detection pixel into crop pixels.

    The mapping preserves rays: unprojecting in the crop reproduces the
    rotated fisheye ray. Raises OutsideCrop when the warped point leaves
    the crop image (that view simply drops the detection).
    """
    cam = rig.camera(crop.source_camera)
    ray_src = unproject_fisheye(pixel, cam.intrinsics)  # raises on bad pixels
    px, ok = warp_detections_to_crop_many(np.asarray(pixel, dtype=float).reshape(1, 2), crop, rig)
    if not ok[0]:
        raise OutsideCrop("warped detection falls outside the crop bounds")
    return px[0]


def crop_view(crop: PerspectiveCrop, rig: CameraRig) -> CameraView:
    """Pose the crop's virtual pinhole camera in the rig frame."""
    cam = rig.camera(crop.source_camera)
    src_from_crop = SE3Pose(quat_conjugate(crop.virtual_rotation), np.zeros(3))
    return CameraView(
        camera_id=crop.source_camera,
        intrinsics=crop.virtual_intrinsics,
        rig_from_cam=cam.rig_from_cam.compose(src_from_crop),
    )
