import numpy as np
import pytest

from annot3d.errors import BehindCamera, InvalidInput
from annot3d.geometry.cameras import (
    FisheyeIntrinsics,
    PinholeIntrinsics,
    project_fisheye,
    project_fisheye_many,
    project_pinhole,
    unproject_fisheye,
    unproject_fisheye_many,
)


def make_intr(k=(0.0, 0.0, 0.0, 0.0), fx=500.0, fy=500.0, cx=512.0, cy=512.0):
    return FisheyeIntrinsics(fx=fx, fy=fy, cx=cx, cy=cy, k=k, width=1024, height=1024)


DISTORTED = make_intr(k=(-0.02, 0.004, -0.0008, 0.0001))


def random_infov_points(intr, rng, n):
    """Points with incidence angle safely inside the modeled domain."""
    theta = rng.uniform(0.0, 0.95 * intr.max_angle_rad, size=n)
    phi = rng.uniform(0.0, 2.0 * np.pi, size=n)
    depth = rng.uniform(0.2, 3.0, size=n)
    pts = np.stack(
        [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=1
    )
    return pts * depth[:, None]


def test_optical_axis_maps_to_principal_point():
    intr = make_intr()
    assert np.allclose(project_fisheye(np.array([0.0, 0.0, 1.0]), intr), [512.0, 512.0])


def test_equidistant_formula_hand_evaluated():
    # theta = 10 deg, zero distortion: u = cx + fx * theta
    intr = make_intr()
    theta = np.deg2rad(10.0)
    px = project_fisheye(np.array([np.tan(theta), 0.0, 1.0]), intr)
    assert np.allclose(px, [512.0 + 500.0 * theta, 512.0], atol=1e-12)


def test_unproject_principal_point_is_axis():
    assert np.allclose(unproject_fisheye(np.array([512.0, 512.0]), make_intr()), [0, 0, 1])


def test_unproject_inverts_hand_example():
    intr = make_intr()
    theta = np.deg2rad(10.0)
    ray = unproject_fisheye(np.array([512.0 + 500.0 * theta, 512.0]), intr)
    expected = np.array([np.sin(theta), 0.0, np.cos(theta)])
    assert np.allclose(ray, expected, atol=1e-9)


@pytest.mark.parametrize("intr", [make_intr(), DISTORTED])
def test_round_trip_rays(intr, rng):
    pts = random_infov_points(intr, rng, 1000)
    px, valid = project_fisheye_many(pts, intr)
    assert valid.all()
    rays, valid2 = unproject_fisheye_many(px, intr)
    assert valid2.all()
    unit = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    # parallel within 1e-9 rad; atan2 form stays precise near zero angle
    cross = np.linalg.norm(np.cross(rays, unit), axis=1)
    dots = np.sum(rays * unit, axis=1)
    assert np.all(np.arctan2(cross, dots) < 1e-9)


@pytest.mark.parametrize("intr", [make_intr(), DISTORTED])
def test_round_trip_pixels(intr, rng):
    theta = rng.uniform(0.0, 0.95 * intr.max_angle_rad, size=500)
    phi = rng.uniform(0.0, 2.0 * np.pi, size=500)
    r = np.array([np.interp(t, [0.0, intr.max_angle_rad], [0.0, intr.max_radius]) for t in theta])
    px = np.stack([intr.cx + intr.fx * r * np.cos(phi), intr.cy + intr.fy * r * np.sin(phi)], axis=1)
    rays, valid = unproject_fisheye_many(px, intr)
    px2, valid2 = project_fisheye_many(rays[valid], intr)
    assert valid2.all()
    assert np.max(np.linalg.norm(px2 - px[valid], axis=1)) < 1e-6


def test_unproject_monotone_incidence():
    intr = DISTORTED
    radii = np.linspace(0.0, 0.98 * intr.max_radius * intr.fx, 50)
    angles = []
    for r in radii:
        ray = unproject_fisheye(np.array([intr.cx + r, intr.cy]), intr)
        angles.append(np.arctan2(np.hypot(ray[0], ray[1]), ray[2]))
    assert np.all(np.diff(angles) > 0.0)


def test_behind_camera_rejected():
    intr = make_intr()
    with pytest.raises(BehindCamera):
        project_fisheye(np.array([0.0, 0.1, -1.0]), intr)  # theta ~ 174 deg
    px, valid = project_fisheye_many(np.array([[0.0, 0.1, -1.0]]), intr)
    assert not valid[0] and np.isnan(px[0]).all()


def test_unproject_outside_image_circle_rejected():
    intr = make_intr()
    with pytest.raises(BehindCamera):
        unproject_fisheye(np.array([512.0 + 500.0 * (intr.max_radius + 0.1), 512.0]), intr)


def test_small_angle_zero_distortion_matches_pinhole(rng):
    fish = make_intr()
    pin = PinholeIntrinsics(fx=500.0, fy=500.0, cx=512.0, cy=512.0, width=1024, height=1024)
    theta = rng.uniform(0.0, np.deg2rad(2.0), size=200)
    phi = rng.uniform(0.0, 2.0 * np.pi, size=200)
    pts = np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=1)
    for p in pts:
        d = np.linalg.norm(project_fisheye(p, fish) - project_pinhole(p, pin))
        assert d < 0.1


def test_nonmonotone_polynomial_rejected():
    with pytest.raises(InvalidInput):
        make_intr(k=(-0.5, 0.0, 0.0, 0.0))  # r'(theta) < 0 inside the domain


def test_principal_point_bounds_validated():
    with pytest.raises(InvalidInput):
        FisheyeIntrinsics(fx=500, fy=500, cx=2000.0, cy=512.0, k=(0, 0, 0, 0), width=1024, height=1024)
