import numpy as np
import pytest

from annot3d.errors import BehindCamera, DegenerateGeometry
from annot3d.fusion.triangulation import (
    pack_observations,
    reprojection_error,
    reprojection_errors,
    triangulate_dlt,
)
from annot3d.geometry.cameras import PinholeIntrinsics, project_pinhole
from annot3d.geometry.crops import CameraView
from annot3d.geometry.se3 import SE3Pose


def pinhole_ring(n, radius=1.0, fx=400.0, size=512):
    """n pinhole views on a circle in the z=0.3 plane, all looking at the origin."""
    intr = PinholeIntrinsics(fx=fx, fy=fx, cx=size / 2, cy=size / 2, width=size, height=size)
    views = []
    for i in range(n):
        a = 2.0 * np.pi * i / n
        pos = np.array([radius * np.cos(a), radius * np.sin(a), 0.3])
        z = -pos / np.linalg.norm(pos)
        up = np.array([0.0, 0.0, 1.0])
        x = np.cross(up, z)
        x /= np.linalg.norm(x)
        y = np.cross(z, x)
        pose = SE3Pose.from_matrix(np.stack([x, y, z], axis=1), pos)
        views.append(CameraView(camera_id=f"cam{i}", intrinsics=intr, rig_from_cam=pose))
    return views


def observe_exact(views, point):
    obs = []
    for v in views:
        px = project_pinhole(v.rig_from_cam.inverse().apply(point), v.intrinsics)
        obs.append((v, px))
    return obs


def test_two_view_exactness():
    views = [
        CameraView(
            camera_id="a",
            intrinsics=PinholeIntrinsics(fx=400, fy=400, cx=256, cy=256, width=512, height=512),
            rig_from_cam=SE3Pose.identity(),
        ),
        CameraView(
            camera_id="b",
            intrinsics=PinholeIntrinsics(fx=400, fy=400, cx=256, cy=256, width=512, height=512),
            rig_from_cam=SE3Pose(np.array([1.0, 0, 0, 0]), np.array([0.5, 0.0, 0.0])),
        ),
    ]
    point = np.array([0.1, -0.05, 1.2])
    recovered = triangulate_dlt(observe_exact(views, point))
    assert np.linalg.norm(recovered - point) < 1e-9


def test_single_observation_degenerate():
    views = pinhole_ring(1)
    with pytest.raises(DegenerateGeometry):
        triangulate_dlt(observe_exact(views, np.array([0.0, 0.0, 0.0])))


def test_parallel_rays_degenerate():
    intr = PinholeIntrinsics(fx=400, fy=400, cx=256, cy=256, width=512, height=512)
    # two cameras at the same center: zero baseline, identical rays
    v = CameraView(camera_id="a", intrinsics=intr, rig_from_cam=SE3Pose.identity())
    w = CameraView(camera_id="b", intrinsics=intr, rig_from_cam=SE3Pose.identity())
    point = np.array([0.1, 0.0, 1.0])
    with pytest.raises(DegenerateGeometry):
        triangulate_dlt(observe_exact([v, w], point))


def test_eight_view_exactness(rng):
    views = pinhole_ring(8)
    for _ in range(20):
        point = rng.uniform(-0.2, 0.2, size=3)
        recovered = triangulate_dlt(observe_exact(views, point))
        assert np.linalg.norm(recovered - point) < 1e-9


def test_reprojection_error_zero_for_exact():
    views = pinhole_ring(3)
    point = np.array([0.05, 0.02, -0.01])
    for obs in observe_exact(views, point):
        assert reprojection_error(point, obs) < 1e-12


def test_ray_aligned_displacement_invisible():
    views = pinhole_ring(3)
    point = np.array([0.05, 0.02, -0.01])
    view, px = observe_exact(views, point)[0]
    center = view.rig_from_cam.t
    along = point + 0.3 * (point - center)
    assert reprojection_error(along, (view, px)) < 1e-9


def test_known_pixel_offset():
    views = pinhole_ring(3)
    point = np.array([0.05, 0.02, -0.01])
    view, px = observe_exact(views, point)[0]
    shifted = px + np.array([0.6, 0.8])  # unit-norm offset
    assert abs(reprojection_error(point, (view, shifted)) - 1.0) < 1e-9


def test_behind_camera_error():
    views = pinhole_ring(3)
    view = views[0]
    behind = view.rig_from_cam.apply(np.array([0.0, 0.0, -1.0]))
    with pytest.raises(BehindCamera):
        reprojection_error(behind, (view, np.array([256.0, 256.0])))


def test_packed_errors_match_scalar(rng):
    views = pinhole_ring(5)
    point = rng.uniform(-0.1, 0.1, size=3)
    obs = observe_exact(views, point)
    noisy = [(v, px + rng.normal(0, 2, size=2)) for v, px in obs]
    packed = pack_observations(noisy)
    probe = rng.uniform(-0.1, 0.1, size=3)
    errs = reprojection_errors(packed, probe.reshape(1, 3))[:, 0]
    for i, o in enumerate(noisy):
        assert np.isclose(errs[i], reprojection_error(probe, o), atol=1e-12)
