import numpy as np
import pytest

from annot3d.errors import BehindCamera, OutsideCrop
from annot3d.geometry.cameras import project_fisheye, project_pinhole, unproject_pinhole
from annot3d.geometry.crops import (
    crop_fov_deg,
    crop_view,
    make_perspective_crop,
    warp_detection_to_crop,
)
from annot3d.geometry.se3 import quat_rotate
from annot3d.geometry.rig import CameraRig, RigCamera
from annot3d.geometry.cameras import FisheyeIntrinsics
from annot3d.geometry.se3 import SE3Pose


def simple_rig(k=(0.0, 0.0, 0.0, 0.0)):
    intr = FisheyeIntrinsics(fx=500.0, fy=500.0, cx=512.0, cy=512.0, k=k, width=1024, height=1024)
    cam0 = RigCamera(id="cam0", intrinsics=intr, rig_from_cam=SE3Pose.identity())
    cam1 = RigCamera(
        id="cam1", intrinsics=intr, rig_from_cam=SE3Pose(np.array([1.0, 0, 0, 0]), np.array([0.5, 0, 0]))
    )
    return CameraRig(cameras=(cam0, cam1), ego_ids=frozenset())


def test_target_on_axis_gives_identity_rotation():
    rig = simple_rig()
    crop = make_perspective_crop("cam0", rig, np.array([0.0, 0.0, 1.0]))
    assert np.allclose(crop.virtual_rotation, [1.0, 0.0, 0.0, 0.0])


def test_focal_from_fov():
    rig = simple_rig()
    crop = make_perspective_crop("cam0", rig, np.array([0.0, 0.0, 1.0]), crop_size=256, fov_deg=60.0)
    assert np.isclose(crop.virtual_intrinsics.fx, 128.0 / np.tan(np.deg2rad(30.0)))


def test_target_warps_to_crop_center():
    rig = simple_rig(k=(-0.02, 0.004, 0.0, 0.0))
    target = np.array([0.3, -0.2, 0.8])
    crop = make_perspective_crop("cam0", rig, target)
    px_fish = project_fisheye(target, rig.camera("cam0").intrinsics)
    px_crop = warp_detection_to_crop(px_fish, crop, rig)
    intr = crop.virtual_intrinsics
    assert np.linalg.norm(px_crop - [intr.cx, intr.cy]) < 1e-6


def test_warp_near_center_is_identity_for_matching_intrinsics():
    # Same focal/principal point, zero distortion, identity rotation: the
    # equidistant and pinhole mappings agree at the axis and stay within
    # the small-angle bound nearby.
    rig = simple_rig()
    crop = make_perspective_crop("cam0", rig, np.array([0.0, 0.0, 1.0]), crop_size=1024, fov_deg=2.0 * np.rad2deg(np.arctan(512.0 / 500.0)))
    assert np.isclose(crop.virtual_intrinsics.fx, 500.0)
    assert np.allclose(warp_detection_to_crop(np.array([512.0, 512.0]), crop, rig), [512.0, 512.0], atol=1e-9)
    near = np.array([512.0 + 10.0, 512.0])  # ~1.1 deg off-axis
    assert np.linalg.norm(warp_detection_to_crop(near, crop, rig) - near) < 0.1


def test_warp_ray_consistency(rng):
    rig = simple_rig(k=(-0.02, 0.004, 0.0, 0.0))
    target = np.array([0.2, 0.1, 1.0])
    crop = make_perspective_crop("cam0", rig, target)
    cam = rig.camera("cam0")
    from annot3d.geometry.cameras import unproject_fisheye

    checked = 0
    for _ in range(500):
        px = np.array([rng.uniform(312, 712), rng.uniform(312, 712)])
        try:
            warped = warp_detection_to_crop(px, crop, rig)
        except OutsideCrop:
            continue
        ray_crop = unproject_pinhole(warped, crop.virtual_intrinsics)
        ray_fish = quat_rotate(crop.virtual_rotation, unproject_fisheye(px, cam.intrinsics))
        angle = np.arctan2(np.linalg.norm(np.cross(ray_crop, ray_fish)), ray_crop @ ray_fish)
        assert angle < 1e-9
        checked += 1
    assert checked > 100


def test_crop_preserves_projections(rng):
    # fisheye projection warped into the crop == direct pinhole projection
    rig = simple_rig(k=(-0.02, 0.004, 0.0, 0.0))
    target = np.array([0.1, 0.05, 0.9])
    crop = make_perspective_crop("cam0", rig, target)
    view = crop_view(crop, rig)
    for _ in range(200):
        point = target + rng.uniform(-0.12, 0.12, size=3)
        px_fish = project_fisheye(point, rig.camera("cam0").intrinsics)
        try:
            warped = warp_detection_to_crop(px_fish, crop, rig)
        except OutsideCrop:
            continue
        direct = project_pinhole(view.rig_from_cam.inverse().apply(point), view.intrinsics)
        assert np.linalg.norm(warped - direct) < 1e-6


def test_crop_view_shares_camera_center():
    rig = simple_rig()
    crop = make_perspective_crop("cam1", rig, np.array([0.8, 0.1, 1.2]))
    view = crop_view(crop, rig)
    assert np.allclose(view.rig_from_cam.t, rig.camera("cam1").rig_from_cam.t)


def test_outside_crop_raises():
    rig = simple_rig()
    crop = make_perspective_crop("cam0", rig, np.array([0.0, 0.0, 1.0]), fov_deg=20.0)
    far_pixel = project_fisheye(np.array([0.9, 0.0, 1.0]), rig.camera("cam0").intrinsics)
    with pytest.raises(OutsideCrop):
        warp_detection_to_crop(far_pixel, crop, rig)


def test_behind_camera_target_rejected():
    rig = simple_rig()
    with pytest.raises(BehindCamera):
        make_perspective_crop("cam0", rig, np.array([0.0, 0.0, -1.0]))


def test_adaptive_fov():
    assert crop_fov_deg(0.0, 0.5) == 60.0
    wide = crop_fov_deg(0.4, 0.5)
    assert 60.0 < wide <= 100.0
    expected = np.rad2deg(2.0 * np.arctan2(1.5 * 0.4, 0.5))
    assert np.isclose(wide, min(expected, 100.0))
