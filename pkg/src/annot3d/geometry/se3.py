"""Rigid transforms in SE(3) with unit-quaternion rotations.

Conventions:
  - Quaternions are stored as (w, x, y, z) and kept unit-norm.
  - A pose acts on column points as x_out = R @ x + t.
  - ``a.compose(b)`` applies ``b`` first, then ``a`` (matrix order A @ B).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInput

_UNIT_TOL = 1e-9


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n == 0.0 or not np.isfinite(n):
        raise InvalidInput("cannot normalize zero or non-finite quaternion")
    return q / n


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    xx, yy, zz = x * x, y * y, z * z
    wx, wy, wz = w * x, w * y, w * z
    xy, xz, yz = x * y, x * z, y * z
    return np.array(
        [
            [1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy)],
            [2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx)],
            [2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy)],
        ]
    )


def matrix_to_quat(m: np.ndarray) -> np.ndarray:
    """Rotation matrix to unit quaternion (w >= 0 branch, Shepperd's method)."""
    m = np.asarray(m, dtype=float)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0.0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = np.array(
            [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        )
    elif m[1, 1] >= m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        q = np.array(
            [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        )
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        q = np.array(
            [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
        )
    if q[0] < 0.0:
        q = -q
    return quat_normalize(q)


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector(s) v of shape (..., 3) by quaternion q."""
    v = np.asarray(v, dtype=float)
    u = np.asarray(q[1:], dtype=float)
    w = float(q[0])
    t = 2.0 * np.cross(u, v)
    return v + w * t + np.cross(u, t)


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0.0:
        raise InvalidInput("rotation axis must be nonzero")
    half = 0.5 * float(angle)
    return np.concatenate(([np.cos(half)], np.sin(half) * axis / n))


def rotvec_to_quat(w: np.ndarray) -> np.ndarray:
    """Exponential map: rotation vector (axis * angle) to quaternion."""
    w = np.asarray(w, dtype=float)
    angle = np.linalg.norm(w)
    if angle < 1e-12:
        # first-order expansion keeps the map smooth through zero
        q = np.concatenate(([1.0], 0.5 * w))
        return quat_normalize(q)
    return np.concatenate(([np.cos(0.5 * angle)], np.sin(0.5 * angle) * w / angle))


def quat_to_rotvec(q: np.ndarray) -> np.ndarray:
    """Logarithm map: unit quaternion to rotation vector, angle in [0, pi]."""
    q = np.asarray(q, dtype=float)
    if q[0] < 0.0:
        q = -q
    sin_half = np.linalg.norm(q[1:])
    if sin_half < 1e-12:
        return 2.0 * q[1:]
    angle = 2.0 * np.arctan2(sin_half, q[0])
    return angle * q[1:] / sin_half


def random_quat(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation (Shoemake's subgroup algorithm)."""
    u1, u2, u3 = rng.random(3)
    a, b = np.sqrt(1.0 - u1), np.sqrt(u1)
    return np.array(
        [
            a * np.sin(2.0 * np.pi * u2),
            a * np.cos(2.0 * np.pi * u2),
            b * np.sin(2.0 * np.pi * u3),
            b * np.cos(2.0 * np.pi * u3),
        ]
    )


def _frozen_array(values, shape: tuple[int, ...]) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(shape)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SE3Pose:
    """Immutable rigid transform: unit quaternion (w,x,y,z) + translation (m)."""

    q: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        q = _frozen_array(self.q, (4,))
        t = _frozen_array(self.t, (3,))
        if abs(np.linalg.norm(q) - 1.0) > _UNIT_TOL:
            raise InvalidInput(f"quaternion norm {np.linalg.norm(q):.12f} not unit within {_UNIT_TOL}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "_matrix", None)

    @staticmethod
    def identity() -> "SE3Pose":
        return SE3Pose(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3))

    @staticmethod
    def from_qt(q, t) -> "SE3Pose":
        """Build from a possibly unnormalized quaternion."""
        return SE3Pose(quat_normalize(np.asarray(q, dtype=float)), np.asarray(t, dtype=float))

    @staticmethod
    def from_matrix(rotation: np.ndarray, translation: np.ndarray) -> "SE3Pose":
        return SE3Pose(matrix_to_quat(rotation), np.asarray(translation, dtype=float))

    def rotation(self) -> np.ndarray:
        # poses are immutable, so the matrix form is computed once
        if self._matrix is None:
            m = quat_to_matrix(self.q)
            m.setflags(write=False)
            object.__setattr__(self, "_matrix", m)
        return self._matrix

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform point(s) of shape (..., 3)."""
        return np.asarray(points, dtype=float) @ self.rotation().T + self.t

    def compose(self, other: "SE3Pose") -> "SE3Pose":
        """self after other: (self * other).apply(x) == self.apply(other.apply(x))."""
        q = quat_normalize(quat_multiply(self.q, other.q))
        return SE3Pose(q, quat_rotate(self.q, other.t) + self.t)

    def inverse(self) -> "SE3Pose":
        qi = quat_conjugate(self.q)
        return SE3Pose(qi, -quat_rotate(qi, self.t))
