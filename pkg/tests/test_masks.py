import numpy as np
import pytest

from annot3d.errors import DimensionMismatch, EmptyMesh
from annot3d.geometry.cameras import FisheyeIntrinsics, project_fisheye_many
from annot3d.geometry.rig import RigCamera
from annot3d.geometry.se3 import SE3Pose, quat_from_axis_angle
from annot3d.masks.imageio import read_pgm, read_ppm, write_pgm, write_ppm
from annot3d.masks.raster import (
    DEFAULT_PALETTE,
    Mask,
    MaskLabel,
    rasterize_mask,
    render_overlay,
)
from annot3d.synth.meshes import box, icosphere

CAM = RigCamera(
    id="cam",
    intrinsics=FisheyeIntrinsics(
        fx=480.0, fy=480.0, cx=319.5, cy=239.5, k=(0.0, 0.0, 0.0, 0.0), width=640, height=480
    ),
    rig_from_cam=SE3Pose.identity(),
)

SPHERE_R = 0.05
SPHERE_D = 0.8
SPHERE_VERTS, SPHERE_FACES = icosphere(subdivisions=4, radius=SPHERE_R)  # 2562 vertices
SPHERE_POSE = SE3Pose(np.array([1.0, 0, 0, 0]), np.array([0.0, 0.0, SPHERE_D]))


def analytic_circle_mask(radius_px, center, width=640, height=480):
    gx, gy = np.meshgrid(np.arange(width), np.arange(height))
    return (gx - center[0]) ** 2 + (gy - center[1]) ** 2 <= radius_px**2


def iou(a, b):
    return np.logical_and(a, b).sum() / max(np.logical_or(a, b).sum(), 1)


def dilate1(bitmap):
    out = bitmap.copy()
    out[1:, :] |= bitmap[:-1, :]
    out[:-1, :] |= bitmap[1:, :]
    out[:, 1:] |= bitmap[:, :-1]
    out[:, :-1] |= bitmap[:, 1:]
    return out


class TestRasterize:
    def test_behind_camera_empty(self):
        pose = SE3Pose(np.array([1.0, 0, 0, 0]), np.array([0.0, 0.0, -1.0]))
        mask = rasterize_mask(SPHERE_VERTS, SPHERE_FACES, pose, CAM)
        assert mask.area == 0

    def test_sphere_matches_analytic_circle(self):
        mask = rasterize_mask(SPHERE_VERTS, SPHERE_FACES, SPHERE_POSE, CAM)
        radius_px = CAM.intrinsics.fx * SPHERE_R / np.sqrt(SPHERE_D**2 - SPHERE_R**2)
        circle = analytic_circle_mask(radius_px, (CAM.intrinsics.cx, CAM.intrinsics.cy))
        assert iou(mask.bitmap, circle) >= 0.98

    def test_projected_vertices_inside_dilated_mask(self):
        mask = rasterize_mask(SPHERE_VERTS, SPHERE_FACES, SPHERE_POSE, CAM)
        dilated = dilate1(mask.bitmap)
        cam_pts = CAM.rig_from_cam.inverse().apply(SPHERE_POSE.apply(SPHERE_VERTS))
        px, valid = project_fisheye_many(cam_pts, CAM.intrinsics)
        in_frustum = (
            valid
            & (px[:, 0] >= 0)
            & (px[:, 0] <= CAM.intrinsics.width - 1)
            & (px[:, 1] >= 0)
            & (px[:, 1] <= CAM.intrinsics.height - 1)
        )
        cols = np.clip(np.round(px[in_frustum, 0]).astype(int), 0, CAM.intrinsics.width - 1)
        rows = np.clip(np.round(px[in_frustum, 1]).astype(int), 0, CAM.intrinsics.height - 1)
        assert dilated[rows, cols].all()

    def test_finer_subdivision_never_hurts(self):
        # coarse mesh + wide-angle placement exercises the subdivision path
        verts, faces = icosphere(subdivisions=1, radius=0.15)
        pose = SE3Pose(np.array([1.0, 0, 0, 0]), np.array([0.25, 0.0, 0.45]))
        limb_angle = np.arcsin(0.15 / np.linalg.norm(pose.t))
        center_dir = pose.t / np.linalg.norm(pose.t)
        ious = []
        # exact equidistant silhouette: cone of rays at angle `limb_angle`
        # around the center direction, projected through the fisheye model
        gx, gy = np.meshgrid(np.arange(640), np.arange(480))
        from annot3d.geometry.cameras import unproject_fisheye_many

        rays, ok = unproject_fisheye_many(
            np.stack([gx.ravel(), gy.ravel()], axis=1).astype(float), CAM.intrinsics
        )
        cos = rays @ center_dir
        analytic = (ok & (cos >= np.cos(limb_angle))).reshape(480, 640)
        for edge in (32.0, 16.0, 8.0, 4.0):
            mask = rasterize_mask(verts, faces, pose, CAM, max_edge_px=edge)
            ious.append(iou(mask.bitmap, analytic))
        assert all(b >= a - 1e-9 for a, b in zip(ious, ious[1:]))

    def test_area_roll_invariant(self):
        mask0 = rasterize_mask(SPHERE_VERTS, SPHERE_FACES, SPHERE_POSE, CAM)
        rolled = RigCamera(
            id="cam",
            intrinsics=CAM.intrinsics,
            rig_from_cam=SE3Pose(quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), 0.7), np.zeros(3)),
        )
        mask1 = rasterize_mask(SPHERE_VERTS, SPHERE_FACES, SPHERE_POSE, rolled)
        assert abs(mask0.area - mask1.area) / mask0.area < 0.01

    def test_empty_mesh_rejected(self):
        with pytest.raises(EmptyMesh):
            rasterize_mask(np.empty((0, 3)), np.empty((0, 3)), SPHERE_POSE, CAM)

    def test_off_screen_mesh_empty(self):
        verts, faces = box((0.05, 0.05, 0.05))
        pose = SE3Pose(np.array([1.0, 0, 0, 0]), np.array([5.0, 0.0, 1.0]))
        assert rasterize_mask(verts, faces, pose, CAM).area == 0


class TestOverlay:
    def _mask(self, label, rows, cols):
        bm = np.zeros((4, 6), dtype=bool)
        bm[rows, cols] = True
        return Mask(width=6, height=4, bitmap=bm, label=label)

    def test_no_masks_blank(self):
        canvas = render_overlay(6, 4, [])
        assert canvas.shape == (4, 6, 3)
        assert not canvas.any()

    def test_hand_wins_overlap(self):
        obj = self._mask(MaskLabel.OBJECT, [0, 1], [0, 0])
        hand = self._mask(MaskLabel.LEFT_HAND, [1, 2], [0, 0])
        canvas = render_overlay(6, 4, [hand, obj])
        assert tuple(canvas[0, 0]) == DEFAULT_PALETTE[MaskLabel.OBJECT]
        assert tuple(canvas[1, 0]) == DEFAULT_PALETTE[MaskLabel.LEFT_HAND]
        assert tuple(canvas[2, 0]) == DEFAULT_PALETTE[MaskLabel.LEFT_HAND]

    def test_contact_tint_last(self):
        hand = self._mask(MaskLabel.RIGHT_HAND, [1], [2])
        contact = self._mask(MaskLabel.CONTACT, [1], [2])
        canvas = render_overlay(6, 4, [hand], contact=contact)
        assert tuple(canvas[1, 2]) == DEFAULT_PALETTE[MaskLabel.CONTACT]

    def test_color_pixel_counts(self):
        obj = self._mask(MaskLabel.OBJECT, [0, 0, 1], [0, 1, 1])
        hand = self._mask(MaskLabel.LEFT_HAND, [1, 2], [1, 3])
        canvas = render_overlay(6, 4, [obj, hand])
        obj_color = np.all(canvas == DEFAULT_PALETTE[MaskLabel.OBJECT], axis=2).sum()
        hand_color = np.all(canvas == DEFAULT_PALETTE[MaskLabel.LEFT_HAND], axis=2).sum()
        overlap = np.logical_and(obj.bitmap, hand.bitmap).sum()
        assert obj_color == obj.area - overlap
        assert hand_color == hand.area

    def test_dimension_mismatch(self):
        bad = Mask(width=5, height=4, bitmap=np.zeros((4, 5), dtype=bool), label=MaskLabel.OBJECT)
        with pytest.raises(DimensionMismatch):
            render_overlay(6, 4, [bad])


class TestImageIo:
    def test_pgm_round_trip(self, rng):
        bm = rng.random((7, 9)) > 0.5
        again = read_pgm(write_pgm(bm))
        assert (again == bm).all()

    def test_ppm_round_trip(self, rng):
        img = rng.integers(0, 256, size=(5, 4, 3), dtype=np.uint8)
        assert (read_ppm(write_ppm(img)) == img).all()

    def test_deterministic_bytes(self, rng):
        bm = rng.random((7, 9)) > 0.5
        assert write_pgm(bm) == write_pgm(bm.copy())
