"""Binary silhouette masks by rasterizing posed meshes through the fisheye.

Straight 3D edges project to curves under fisheye distortion, so each
triangle is recursively subdivided (edge midpoints in 3D) until every
projected edge is at most `max_edge_px` long, bounding the curvature
error, and the flat sub-triangles are filled in pixel space. Binary
silhouettes need no z-buffer. Triangles facing away from the camera are
culled (for a closed mesh the union is unchanged: the first surface hit
along any covered ray is front-facing), as are triangles with a vertex
outside the modeled fisheye domain.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, EmptyMesh, InvalidInput
from ..geometry.cameras import project_fisheye_many
from ..geometry.rig import RigCamera
from ..geometry.se3 import SE3Pose

DEFAULT_MAX_EDGE_PX = 8.0
_MAX_SUBDIVISION_DEPTH = 10


class MaskLabel(str, enum.Enum):
    LEFT_HAND = "left_hand"
    RIGHT_HAND = "right_hand"
    OBJECT = "object"
    CONTACT = "contact"


DEFAULT_PALETTE: dict[MaskLabel, tuple[int, int, int]] = {
    MaskLabel.OBJECT: (40, 200, 40),
    MaskLabel.LEFT_HAND: (220, 50, 50),
    MaskLabel.RIGHT_HAND: (50, 80, 220),
    MaskLabel.CONTACT: (255, 220, 0),
}


@dataclass(frozen=True, eq=False)
class Mask:
    width: int
    height: int
    bitmap: np.ndarray  # (height, width) bool
    label: MaskLabel

    def __post_init__(self):
        bm = np.array(self.bitmap, dtype=bool)
        if bm.shape != (self.height, self.width):
            raise DimensionMismatch(
                f"bitmap shape {bm.shape} does not match (height={self.height}, width={self.width})"
            )
        bm.setflags(write=False)
        object.__setattr__(self, "bitmap", bm)

    @property
    def area(self) -> int:
        return int(self.bitmap.sum())


def _fill_triangle(bitmap: np.ndarray, tri: np.ndarray) -> None:
    """Set pixels whose integer-coordinate sample point lies in the 2D triangle."""
    h, w = bitmap.shape
    xs, ys = tri[:, 0], tri[:, 1]
    x0 = max(int(np.floor(xs.min())), 0)
    x1 = min(int(np.ceil(xs.max())), w - 1)
    y0 = max(int(np.floor(ys.min())), 0)
    y1 = min(int(np.ceil(ys.max())), h - 1)
    if x0 > x1 or y0 > y1:
        return
    a, b, c = tri
    area = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    if area == 0.0:
        return
    gx, gy = np.meshgrid(np.arange(x0, x1 + 1), np.arange(y0, y1 + 1))
    sign = np.sign(area)

    def edge(p, q):
        return ((q[0] - p[0]) * (gy - p[1]) - (q[1] - p[1]) * (gx - p[0])) * sign

    inside = (edge(a, b) >= 0.0) & (edge(b, c) >= 0.0) & (edge(c, a) >= 0.0)
    bitmap[y0 : y1 + 1, x0 : x1 + 1] |= inside


def rasterize_mask(
    vertices: np.ndarray,
    faces: np.ndarray,
    pose: SE3Pose,
    camera: RigCamera,
    max_edge_px: float = DEFAULT_MAX_EDGE_PX,
    *,
    label: MaskLabel = MaskLabel.OBJECT,
    cull_backfaces: bool = True,
) -> Mask:
    """Silhouette of the posed mesh in the camera's image.

    `pose` maps mesh coordinates to the rig frame. A mesh entirely outside
    the view yields an empty mask, never an error.
    """
    verts = np.asarray(vertices, dtype=float).reshape(-1, 3)
    faces = np.asarray(faces, dtype=int).reshape(-1, 3)
    if verts.shape[0] == 0:
        raise EmptyMesh("cannot rasterize an empty mesh")
    if max_edge_px <= 0.0:
        raise InvalidInput("max_edge_px must be positive")
    intr = camera.intrinsics
    bitmap = np.zeros((intr.height, intr.width), dtype=bool)
    cam_verts = camera.rig_from_cam.inverse().apply(pose.apply(verts))

    def subdivide(tri3d: np.ndarray, depth: int) -> None:
        px, valid = project_fisheye_many(tri3d, intr)
        if not valid.all():
            return  # outside the modeled domain: cull
        edges = np.linalg.norm(px - np.roll(px, -1, axis=0), axis=1)
        if edges.max() > max_edge_px and depth < _MAX_SUBDIVISION_DEPTH:
            mid = 0.5 * (tri3d + np.roll(tri3d, -1, axis=0))  # m01, m12, m20
            a, b, c = tri3d
            m01, m12, m20 = mid
            subdivide(np.array([a, m01, m20]), depth + 1)
            subdivide(np.array([b, m12, m01]), depth + 1)
            subdivide(np.array([c, m20, m12]), depth + 1)
            subdivide(np.array([m01, m12, m20]), depth + 1)
            return
        _fill_triangle(bitmap, px)

    for face in faces:
        tri = cam_verts[face]
        if cull_backfaces:
            normal = np.cross(tri[1] - tri[0], tri[2] - tri[0])
            if float(normal @ tri.mean(axis=0)) >= 0.0:
                continue  # facing away from the camera at the origin
        subdivide(tri, 0)
    return Mask(width=intr.width, height=intr.height, bitmap=bitmap, label=label)


def render_overlay(
    width: int,
    height: int,
    masks: list[Mask],
    contact: Mask | None = None,
    palette: dict[MaskLabel, tuple[int, int, int]] | None = None,
) -> np.ndarray:
    """Composite masks into an RGB buffer (hands over object, contact last).

    Returns (height, width, 3) uint8; deterministic for fixed inputs.
    """
    palette = DEFAULT_PALETTE if palette is None else palette
    canvas = np.zeros((height, width, 3), dtype=np.uint8)
    layers = [m for m in masks if m.label == MaskLabel.OBJECT] + [
        m for m in masks if m.label in (MaskLabel.LEFT_HAND, MaskLabel.RIGHT_HAND)
    ]
    if contact is not None:
        layers.append(contact)
    for mask in layers:
        if (mask.width, mask.height) != (width, height):
            raise DimensionMismatch(
                f"mask {mask.label.value} is {mask.width}x{mask.height}, canvas {width}x{height}"
            )
        canvas[mask.bitmap] = palette[mask.label]
    return canvas
