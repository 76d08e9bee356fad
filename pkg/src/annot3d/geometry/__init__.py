"""Camera models, rig calibration, SE(3) poses, and perspective crops."""

from .se3 import SE3Pose, quat_multiply, quat_normalize, quat_rotate, quat_to_matrix
from .cameras import (
    FisheyeIntrinsics,
    PinholeIntrinsics,
    project_fisheye,
    project_fisheye_many,
    project_pinhole,
    project_pinhole_many,
    unproject_fisheye,
    unproject_fisheye_many,
    unproject_pinhole,
)
from .rig import CameraRig, RigCamera, load_calibration, parse_calibration, save_calibration
from .crops import (
    CameraView,
    PerspectiveCrop,
    crop_fov_deg,
    crop_view,
    make_perspective_crop,
    warp_detection_to_crop,
)

__all__ = [
    "SE3Pose",
    "quat_multiply",
    "quat_normalize",
    "quat_rotate",
    "quat_to_matrix",
    "FisheyeIntrinsics",
    "PinholeIntrinsics",
    "project_fisheye",
    "project_fisheye_many",
    "project_pinhole",
    "project_pinhole_many",
    "unproject_fisheye",
    "unproject_fisheye_many",
    "unproject_pinhole",
    "CameraRig",
    "RigCamera",
    "load_calibration",
    "parse_calibration",
    "save_calibration",
    "CameraView",
    "PerspectiveCrop",
    "crop_fov_deg",
    "crop_view",
    "make_perspective_crop",
    "warp_detection_to_crop",
]
