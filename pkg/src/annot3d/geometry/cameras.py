"""Fisheye and pinhole camera models.

Camera frames follow the computer-vision convention: x right, y down, z
forward along the optical axis. Pixel coordinates are continuous with the
origin at the top-left corner; (cx, cy) is the projection of the optical
axis.

The fisheye model ("fisheye-eq4") is an equidistant polynomial: a ray at
incidence angle theta from the optical axis lands at normalized radius

    r(theta) = theta + k1 theta^3 + k2 theta^5 + k3 theta^7 + k4 theta^9

from the principal point, scaled by (fx, fy). The modeled domain extends
to ``max_angle_deg`` (default 100 deg), which may exceed 90 deg, so
points with z <= 0 can still be in view. r(theta) must be strictly
increasing on the modeled domain; this is checked at construction.

Unprojection inverts r(theta) by Newton iteration (tolerance 1e-10 rad,
at most 50 steps).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import BehindCamera, InvalidInput, NoConvergence

NEWTON_TOL_RAD = 1e-10
NEWTON_MAX_ITER = 50


@dataclass(frozen=True)
class FisheyeIntrinsics:
    """Equidistant-polynomial fisheye intrinsics (pixels and radians)."""

    fx: float
    fy: float
    cx: float
    cy: float
    k: tuple[float, float, float, float]
    width: int
    height: int
    max_angle_deg: float = 100.0

    def __post_init__(self):
        object.__setattr__(self, "k", tuple(float(v) for v in self.k))
        if len(self.k) != 4:
            raise InvalidInput("fisheye model takes exactly 4 radial coefficients")
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidInput("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise InvalidInput("principal point must lie inside the image")
        # reject non-monotone polynomials: Newton inversion needs r'(theta) > 0
        thetas = np.linspace(0.0, self.max_angle_rad, 64)
        if np.any(_radial_derivative(thetas, self.k) <= 0.0):
            raise InvalidInput("r(theta) must be strictly increasing on the modeled domain")

    @property
    def max_angle_rad(self) -> float:
        return float(np.deg2rad(self.max_angle_deg))

    @property
    def max_radius(self) -> float:
        """Normalized radius of the modeled image circle."""
        return float(_radial_poly(np.array(self.max_angle_rad), self.k))


@dataclass(frozen=True)
class PinholeIntrinsics:
    """Distortion-free pinhole intrinsics (pixels)."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidInput("focal lengths must be positive")


def _radial_poly(theta: np.ndarray, k) -> np.ndarray:
    t2 = theta * theta
    k1, k2, k3, k4 = k
    return theta * (1.0 + t2 * (k1 + t2 * (k2 + t2 * (k3 + t2 * k4))))


def _radial_derivative(theta: np.ndarray, k) -> np.ndarray:
    t2 = theta * theta
    k1, k2, k3, k4 = k
    return 1.0 + t2 * (3.0 * k1 + t2 * (5.0 * k2 + t2 * (7.0 * k3 + t2 * 9.0 * k4)))


def project_fisheye_many(points: np.ndarray, intr: FisheyeIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Project (N, 3) camera-frame points; returns (pixels (N, 2), valid (N,)).

    Rows with incidence angle beyond the modeled domain are marked invalid
    (pixels set to NaN) instead of raising.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    xy_norm = np.hypot(pts[:, 0], pts[:, 1])
    theta = np.arctan2(xy_norm, pts[:, 2])
    valid = theta < intr.max_angle_rad
    r = _radial_poly(theta, intr.k)
    # unit direction in the image plane; optical axis maps to the principal point
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(xy_norm > 0.0, r / np.where(xy_norm > 0.0, xy_norm, 1.0), 0.0)
    px = np.empty((pts.shape[0], 2))
    px[:, 0] = intr.cx + intr.fx * pts[:, 0] * scale
    px[:, 1] = intr.cy + intr.fy * pts[:, 1] * scale
    px[~valid] = np.nan
    return px, valid


def project_fisheye(point: np.ndarray, intr: FisheyeIntrinsics) -> np.ndarray:
    """Project one camera-frame point (meters) to a fisheye pixel.

    Raises BehindCamera if the incidence angle exceeds the modeled domain.
    """
    px, valid = project_fisheye_many(np.asarray(point, dtype=float).reshape(1, 3), intr)
    if not valid[0]:
        raise BehindCamera("incidence angle exceeds the modeled fisheye domain")
    return px[0]


def _invert_radial(r: np.ndarray, intr: FisheyeIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Solve r(theta) = r by Newton; returns (theta, converged mask)."""
    theta = np.clip(r, 0.0, intr.max_angle_rad)  # equidistant head term: good initial guess
    converged = np.zeros(r.shape, dtype=bool)
    for _ in range(NEWTON_MAX_ITER):
        f = _radial_poly(theta, intr.k) - r
        done = np.abs(f) / np.maximum(_radial_derivative(theta, intr.k), 1e-12) < NEWTON_TOL_RAD
        converged |= done
        if converged.all():
            break
        step = f / _radial_derivative(theta, intr.k)
        theta = np.where(converged, theta, np.clip(theta - step, 0.0, intr.max_angle_rad))
    return theta, converged


def unproject_fisheye_many(pixels: np.ndarray, intr: FisheyeIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Unproject (N, 2) pixels to unit rays; returns (rays (N, 3), valid (N,))."""
    px = np.asarray(pixels, dtype=float).reshape(-1, 2)
    dx = (px[:, 0] - intr.cx) / intr.fx
    dy = (px[:, 1] - intr.cy) / intr.fy
    r = np.hypot(dx, dy)
    in_circle = r <= intr.max_radius
    theta, converged = _invert_radial(np.where(in_circle, r, 0.0), intr)
    valid = in_circle & converged
    rays = np.empty((px.shape[0], 3))
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(r > 0.0, np.sin(theta) / np.where(r > 0.0, r, 1.0), 0.0)
    rays[:, 0] = dx * scale
    rays[:, 1] = dy * scale
    rays[:, 2] = np.cos(theta)
    rays[~valid] = np.nan
    return rays, valid


def unproject_fisheye(pixel: np.ndarray, intr: FisheyeIntrinsics) -> np.ndarray:
    """Unproject one pixel to a unit ray in the camera frame.

    Raises BehindCamera for pixels outside the modeled image circle and
    NoConvergence if the Newton inversion fails.
    """
    px = np.asarray(pixel, dtype=float).reshape(1, 2)
    dx = (px[0, 0] - intr.cx) / intr.fx
    dy = (px[0, 1] - intr.cy) / intr.fy
    if np.hypot(dx, dy) > intr.max_radius:
        raise BehindCamera("pixel outside the modeled fisheye image circle")
    rays, valid = unproject_fisheye_many(px, intr)
    if not valid[0]:
        raise NoConvergence(f"radial inversion did not converge in {NEWTON_MAX_ITER} iterations")
    return rays[0]


def project_pinhole_many(points: np.ndarray, intr: PinholeIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Project (N, 3) camera-frame points through a pinhole; invalid where z <= 0."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    valid = pts[:, 2] > 0.0
    z = np.where(valid, pts[:, 2], 1.0)
    px = np.empty((pts.shape[0], 2))
    px[:, 0] = intr.cx + intr.fx * pts[:, 0] / z
    px[:, 1] = intr.cy + intr.fy * pts[:, 1] / z
    px[~valid] = np.nan
    return px, valid


def project_pinhole(point: np.ndarray, intr: PinholeIntrinsics) -> np.ndarray:
    px, valid = project_pinhole_many(np.asarray(point, dtype=float).reshape(1, 3), intr)
    if not valid[0]:
        raise BehindCamera("point behind the pinhole camera")
    return px[0]


def unproject_pinhole(pixel: np.ndarray, intr: PinholeIntrinsics) -> np.ndarray:
    """Unit ray through a pinhole pixel."""
    u, v = np.asarray(pixel, dtype=float)
    ray = np.array([(u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0])
    return ray / np.linalg.norm(ray)
