"""Multi-view generalized PnP: absolute object pose from 2D-3D matches.

All calibrated cameras are treated as one generalized camera: the solver
minimizes summed squared angular residuals between each observed ray and
the direction to its transformed landmark. Rather than a closed-form
minimal solver, the pose is found by Levenberg-Marquardt from multiple
rotation restarts (identity plus random rotations, translation seeded by
a weighted linear solve per restart), which is robust at desk scale;
noiseless exactness is gated by tests.
"""

from __future__ import annotations

import numpy as np

from ..errors import Degenerate, NoConvergence
from ..geometry.cameras import unproject_fisheye_many
from ..geometry.rig import CameraRig
from ..geometry.se3 import SE3Pose, quat_multiply, quat_normalize, quat_rotate, random_quat, rotvec_to_quat
from .model import Correspondence, ObjectModel

MIN_CORRESPONDENCES = 6
MAX_MEAN_RESIDUAL_RAD = 0.2


def _prepare(correspondences: list[Correspondence], rig: CameraRig, model: ObjectModel):
    """Per-correspondence camera transforms, observed rays, landmarks, weights."""
    n = len(correspondences)
    rot_cr = np.empty((n, 3, 3))
    t_cr = np.empty((n, 3))
    rays = np.empty((n, 3))
    points = np.empty((n, 3))
    weights = np.empty(n)
    landmarks = model.landmark_points
    by_cam = {}
    for i, c in enumerate(correspondences):
        if c.landmark_index >= landmarks.shape[0]:
            raise Degenerate(f"landmark index {c.landmark_index} outside the model's landmark list")
        cam = by_cam.get(c.camera_id)
        if cam is None:
            cam = rig.camera(c.camera_id)
            by_cam[c.camera_id] = cam
        cam_from_rig = cam.rig_from_cam.inverse()
        rot_cr[i] = cam_from_rig.rotation()
        t_cr[i] = cam_from_rig.t
        ray, valid = unproject_fisheye_many(c.pixel.reshape(1, 2), cam.intrinsics)
        if not valid[0]:
            raise Degenerate("correspondence pixel outside the modeled fisheye domain")
        rays[i] = ray[0]
        points[i] = landmarks[c.landmark_index]
        weights[i] = c.weight
    return rot_cr, t_cr, rays, points, weights


def _residuals(rot, trans, rot_cr, t_cr, rays, points, sqrt_w):
    """Tangent-plane angular residuals, (N, 3); rows scaled by sqrt(weight)."""
    y = points @ rot.T + trans
    x = np.einsum("nij,nj->ni", rot_cr, y) + t_cr
    norm = np.linalg.norm(x, axis=1, keepdims=True)
    norm = np.maximum(norm, 1e-12)
    xhat = x / norm
    proj = xhat - np.sum(xhat * rays, axis=1, keepdims=True) * rays
    return sqrt_w[:, None] * proj, y, x, norm[:, 0]


def _solve_translation(rot, rot_cr, t_cr, rays, points, sqrt_w):
    """Weighted linear least squares for t given R: rays x predicted = 0."""
    n = rays.shape[0]
    a = np.empty((3 * n, 3))
    b = np.empty(3 * n)
    rl = np.einsum("nij,nj->ni", rot_cr, points @ rot.T) + t_cr
    for i in range(n):
        ux, uy, uz = rays[i]
        cross = np.array([[0.0, -uz, uy], [uz, 0.0, -ux], [-uy, ux, 0.0]])
        a[3 * i : 3 * i + 3] = sqrt_w[i] * cross @ rot_cr[i]
        b[3 * i : 3 * i + 3] = -sqrt_w[i] * cross @ rl[i]
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    return sol


def _refine_lm(rot, trans, rot_cr, t_cr, rays, points, sqrt_w, max_iter=100):
    res, y, x, norms = _residuals(rot, trans, rot_cr, t_cr, rays, points, sqrt_w)
    obj = float(np.sum(res * res))
    mu = 1e-4
    for _ in range(max_iter):
        if obj < 1e-28:
            break
        anchor = y.mean(axis=0)
        xhat = x / norms[:, None]
        n = rays.shape[0]
        jac = np.empty((3 * n, 6))
        for i in range(n):
            p_u = np.eye(3) - np.outer(rays[i], rays[i])
            p_x = (np.eye(3) - np.outer(xhat[i], xhat[i])) / norms[i]
            d_e_dy = sqrt_w[i] * p_u @ p_x @ rot_cr[i]
            rel = y[i] - anchor
            skew = np.array([[0.0, rel[2], -rel[1]], [-rel[2], 0.0, rel[0]], [rel[1], -rel[0], 0.0]])
            jac[3 * i : 3 * i + 3, 0:3] = d_e_dy @ skew
            jac[3 * i : 3 * i + 3, 3:6] = d_e_dy
        r = res.reshape(-1)
        jtj = jac.T @ jac
        g = jac.T @ r
        diag = np.maximum(np.diag(jtj), 1e-12)
        improved = False
        for _ in range(10):
            try:
                delta = np.linalg.solve(jtj + mu * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                mu *= 5.0
                continue
            dq = rotvec_to_quat(delta[:3])
            new_rot_q = quat_normalize(quat_multiply(dq, _matrix_to_quat_cached(rot)))
            from ..geometry.se3 import quat_to_matrix

            new_rot = quat_to_matrix(new_rot_q)
            new_trans = quat_rotate(dq, trans - anchor) + anchor + delta[3:6]
            new_res, new_y, new_x, new_norms = _residuals(
                new_rot, new_trans, rot_cr, t_cr, rays, points, sqrt_w
            )
            new_obj = float(np.sum(new_res * new_res))
            if new_obj < obj:
                rot, trans = new_rot, new_trans
                res, y, x, norms = new_res, new_y, new_x, new_norms
                step = float(np.linalg.norm(delta))
                rel_drop = (obj - new_obj) / max(obj, 1e-300)
                obj = new_obj
                mu = max(mu / 3.0, 1e-12)
                improved = True
                if step < 1e-12 or rel_drop < 1e-12:
                    return rot, trans, obj
                break
            mu *= 5.0
        if not improved:
            break
    return rot, trans, obj


def _matrix_to_quat_cached(rot):
    from ..geometry.se3 import matrix_to_quat

    return matrix_to_quat(rot)


def gpnp_solve(
    correspondences: list[Correspondence],
    rig: CameraRig,
    model: ObjectModel,
    *,
    restarts: int = 20,
    seed: int = 0,
) -> SE3Pose:
    """Object-to-rig pose from weighted multi-camera correspondences.

    Raises Degenerate for fewer than 6 correspondences or a near-collinear
    landmark configuration, NoConvergence when no restart reaches a mean
    angular residual below 0.2 rad.
    """
    if len(correspondences) < MIN_CORRESPONDENCES:
        raise Degenerate(f"need at least {MIN_CORRESPONDENCES} correspondences")
    rot_cr, t_cr, rays, points, weights = _prepare(correspondences, rig, model)
    centered = points - points.mean(axis=0)
    svals = np.linalg.svd(centered, compute_uv=False)
    if svals[1] < 1e-9 * max(svals[0], 1e-12):
        raise Degenerate("landmarks are near-collinear")
    sqrt_w = np.sqrt(weights)

    rng = np.random.default_rng(seed)
    from ..geometry.se3 import quat_to_matrix

    candidates = [np.eye(3)] + [quat_to_matrix(random_quat(rng)) for _ in range(max(0, restarts - 1))]
    best = None
    for rot0 in candidates:
        trans0 = _solve_translation(rot0, rot_cr, t_cr, rays, points, sqrt_w)
        rot, trans, obj = _refine_lm(rot0, trans0, rot_cr, t_cr, rays, points, sqrt_w)
        if best is None or obj < best[2]:
            best = (rot, trans, obj)
            if obj < 1e-24:
                break
    rot, trans, obj = best
    mean_res = np.sqrt(obj / max(np.sum(weights), 1e-12))
    if not np.isfinite(obj) or mean_res > MAX_MEAN_RESIDUAL_RAD:
        raise NoConvergence(f"gpnp residual {mean_res:.3f} rad exceeds {MAX_MEAN_RESIDUAL_RAD}")
    return SE3Pose.from_matrix(rot, trans)
