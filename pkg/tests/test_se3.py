import numpy as np
import pytest

from annot3d.errors import InvalidInput
from annot3d.geometry.se3 import (
    SE3Pose,
    matrix_to_quat,
    quat_rotate,
    quat_to_matrix,
    quat_to_rotvec,
    random_quat,
    rotvec_to_quat,
)


def random_pose(rng):
    return SE3Pose(random_quat(rng), rng.uniform(-1.0, 1.0, size=3))


def test_identity_acts_trivially(rng):
    pts = rng.standard_normal((10, 3))
    assert np.allclose(SE3Pose.identity().apply(pts), pts)


def test_non_unit_quaternion_rejected():
    with pytest.raises(InvalidInput):
        SE3Pose(np.array([1.0, 0.1, 0.0, 0.0]), np.zeros(3))


def test_composition_is_associative(rng):
    for _ in range(20):
        a, b, c = (random_pose(rng) for _ in range(3))
        left = a.compose(b).compose(c)
        right = a.compose(b.compose(c))
        assert np.allclose(left.q, right.q, atol=1e-9) or np.allclose(left.q, -right.q, atol=1e-9)
        assert np.allclose(left.t, right.t, atol=1e-9)


def test_inverse_composes_to_identity(rng):
    for _ in range(20):
        a = random_pose(rng)
        ident = a.compose(a.inverse())
        assert abs(abs(ident.q[0]) - 1.0) < 1e-9
        assert np.linalg.norm(ident.t) < 1e-9


def test_compose_matches_sequential_apply(rng):
    a, b = random_pose(rng), random_pose(rng)
    pts = rng.standard_normal((5, 3))
    assert np.allclose(a.compose(b).apply(pts), a.apply(b.apply(pts)), atol=1e-12)


def test_quat_matrix_round_trip(rng):
    for _ in range(50):
        q = random_quat(rng)
        q2 = matrix_to_quat(quat_to_matrix(q))
        assert np.allclose(q, q2, atol=1e-9) or np.allclose(q, -q2, atol=1e-9)


def test_quat_rotate_matches_matrix(rng):
    q = random_quat(rng)
    v = rng.standard_normal((7, 3))
    assert np.allclose(quat_rotate(q, v), v @ quat_to_matrix(q).T, atol=1e-12)


def test_rotvec_round_trip(rng):
    for _ in range(50):
        direction = rng.standard_normal(3)
        direction /= np.linalg.norm(direction)
        w = direction * rng.uniform(0.0, np.pi * 0.95)
        assert np.allclose(quat_to_rotvec(rotvec_to_quat(w)), w, atol=1e-9)
