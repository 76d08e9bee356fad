"""Forward kinematics, skinning, and the analytic keypoint Jacobian.

Pose increments use a fixed chart shared by the solver and by
finite-difference checks: the root rotation is perturbed globally about
an anchor point c (rotation R <- exp(w^) R, translation
t <- exp(w^)(t - c) + c + v), and joint angles are perturbed additively.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInput
from ..geometry.se3 import SE3Pose, quat_multiply, quat_normalize, rotvec_to_quat
from .model import HandModel


@dataclass(frozen=True)
class FkResult:
    """Global joint transforms plus per-DOF axis/pivot data for Jacobians."""

    rot: np.ndarray        # (J, 3, 3) global joint rotations
    pos: np.ndarray        # (J, 3) global joint origins
    dof_axes: np.ndarray   # (D, 3) world-frame rotation axes
    dof_pivots: np.ndarray  # (D, 3) world-frame pivot points


def _axis_rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    c, s = np.cos(angle), np.sin(angle)
    ax, ay, az = axis
    cross = np.array([[0.0, -az, ay], [az, 0.0, -ax], [-ay, ax, 0.0]])
    return c * np.eye(3) + s * cross + (1.0 - c) * np.outer(axis, axis)


def forward_kinematics(model: HandModel, pose) -> FkResult:
    angles = np.asarray(pose.joint_angles, dtype=float)
    if angles.shape != (model.n_angles,):
        raise InvalidInput(f"expected {model.n_angles} joint angles, got {angles.shape}")
    t = model._tables
    n_j = model.n_joints
    root_rot = pose.root.rotation()
    root_pos = np.asarray(pose.root.t, dtype=float)

    rot = np.empty((n_j, 3, 3))
    pos = np.empty((n_j, 3))
    dof_axes = np.empty((model.n_angles, 3))
    dof_pivots = np.empty((model.n_angles, 3))

    local_rest = t["local_rest_rot"]
    offsets = t["scaled_local_offsets"]
    dof = 0
    for j, spec in enumerate(model.joints):
        if spec.parent < 0:
            base_rot = root_rot
            base_pos = root_pos
        else:
            base_rot = rot[spec.parent]
            base_pos = pos[spec.parent]
        origin = base_pos + base_rot @ offsets[j]
        r = base_rot @ local_rest[j]
        for axis in spec.axes:
            dof_axes[dof] = r @ axis
            dof_pivots[dof] = origin
            r = r @ _axis_rotation(axis, float(angles[dof]))
            dof += 1
        rot[j] = r
        pos[j] = origin
    return FkResult(rot=rot, pos=pos, dof_axes=dof_axes, dof_pivots=dof_pivots)


def skin(model: HandModel, pose) -> tuple[np.ndarray, np.ndarray]:
    """Linear blend skinning: (vertices (V, 3), joint positions (J, 3))."""
    fk = forward_kinematics(model, pose)
    t = model._tables
    vi, ji, wi, local = t["skin_vi"], t["skin_ji"], t["skin_wi"], t["skin_local"]
    moved = np.einsum("pab,pb->pa", fk.rot[ji], local) + fk.pos[ji]
    vertices = np.zeros((model.n_vertices, 3))
    np.add.at(vertices, vi, wi[:, None] * moved)
    return vertices, fk.pos


def _keypoints_from_fk(model: HandModel, fk: FkResult) -> np.ndarray:
    t = model._tables
    pk, pj, local, mass = t["pair_k"], t["pair_j"], t["pair_local"], t["pair_mass"]
    moved = np.einsum("pab,pb->pa", fk.rot[pj], local) + mass[:, None] * fk.pos[pj]
    keypoints = np.zeros((model.keypoint_regressor.shape[0], 3))
    np.add.at(keypoints, pk, moved)
    return keypoints


def keypoints_from_pose(model: HandModel, pose) -> np.ndarray:
    """The 21 model keypoints (regressor applied to skinned vertices)."""
    return _keypoints_from_fk(model, forward_kinematics(model, pose))


def keypoint_jacobian(
    model: HandModel, pose, anchor: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Keypoints and their Jacobian in the increment chart.

    Returns (keypoints (21, 3), jacobian (63, 6 + n_angles)); increment
    layout is [root rotation w (3), root translation v (3), angles (D)].
    `anchor` defaults to the root translation.
    """
    fk = forward_kinematics(model, pose)
    t = model._tables
    pk, pj, local, mass = t["pair_k"], t["pair_j"], t["pair_local"], t["pair_mass"]
    desc = t["desc"]
    n_kp = model.keypoint_regressor.shape[0]
    n_dof = model.n_angles
    if anchor is None:
        anchor = np.asarray(pose.root.t, dtype=float)

    moved = np.einsum("pab,pb->pa", fk.rot[pj], local) + mass[:, None] * fk.pos[pj]
    keypoints = np.zeros((n_kp, 3))
    np.add.at(keypoints, pk, moved)

    jac = np.zeros((3 * n_kp, 6 + n_dof))
    # root rotation about the anchor: d kp / d w = -[kp - c]_x
    rel = keypoints - anchor
    for k in range(n_kp):
        rx, ry, rz = rel[k]
        jac[3 * k : 3 * k + 3, 0:3] = np.array(
            [[0.0, rz, -ry], [-rz, 0.0, rx], [ry, -rx, 0.0]]
        )
        jac[3 * k : 3 * k + 3, 3:6] = np.eye(3)

    # joint angles: each weighted influence point rotates about its DOF axis
    # when the owning joint is an ancestor of the influencing joint
    active = desc[:, pj]  # (D, P)
    arm = moved[None, :, :] - mass[None, :, None] * fk.dof_pivots[:, None, :]
    contrib = np.cross(fk.dof_axes[:, None, :], arm)  # (D, P, 3)
    contrib = np.where(active[:, :, None], contrib, 0.0)
    for d in range(n_dof):
        block = np.zeros((n_kp, 3))
        np.add.at(block, pk, contrib[d])
        jac[:, 6 + d] = block.reshape(-1)
    return keypoints, jac


def apply_increment(pose, delta: np.ndarray, anchor: np.ndarray | None = None):
    """Apply an increment [w, v, dtheta] in the chart used by keypoint_jacobian."""
    from .ik import HandPose

    delta = np.asarray(delta, dtype=float)
    w, v, dtheta = delta[:3], delta[3:6], delta[6:]
    if anchor is None:
        anchor = np.asarray(pose.root.t, dtype=float)
    dq = rotvec_to_quat(w)
    q_new = quat_normalize(quat_multiply(dq, pose.root.q))
    from ..geometry.se3 import quat_rotate

    t_new = quat_rotate(dq, pose.root.t - anchor) + anchor + v
    return HandPose(
        root=SE3Pose(q_new, t_new),
        joint_angles=np.asarray(pose.joint_angles, dtype=float) + dtheta,
        hand=pose.hand,
    )
