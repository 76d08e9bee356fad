"""Pose refinement on Huber-robustified fisheye reprojection error.

Geometric stand-in for the out-of-scope neural refiner: starting from an
initial pose within the convergence basin, Levenberg-Marquardt minimizes
the robust reprojection objective through the full fisheye model across
all cameras. After the robust phase converges, correspondences within
2.5x the Huber scale are re-solved with a plain quadratic pass (gross
outliers drop out entirely instead of keeping their bounded Huber pull).
The accompanying confidence blends the inlier fraction with the mean
inlier residual and gates the tracking state machine.
"""

from __future__ import annotations

import numpy as np

from ..errors import NoConvergence
from ..geometry.cameras import project_fisheye_many
from ..geometry.rig import CameraRig
from ..geometry.se3 import SE3Pose, quat_multiply, quat_normalize, quat_rotate, rotvec_to_quat
from .model import Correspondence, ObjectModel

DEFAULT_HUBER_SCALE_PX = 4.0
MIN_CORRESPONDENCES = 6
TRIM_FACTOR = 2.5
_BEHIND_PENALTY_PX = 1e6
_FD_EPS = 1e-6


class _CorrespondenceBatch:
    """Correspondences grouped by camera so residuals evaluate vectorized."""

    def __init__(self, correspondences, rig: CameraRig, model: ObjectModel):
        n = len(correspondences)
        self.points = np.empty((n, 3))
        self.pixels = np.empty((n, 2))
        self.weights = np.empty(n)
        landmarks = model.landmark_points
        groups: dict[str, list[int]] = {}
        for i, c in enumerate(correspondences):
            self.points[i] = landmarks[c.landmark_index]
            self.pixels[i] = c.pixel
            self.weights[i] = c.weight
            groups.setdefault(c.camera_id, []).append(i)
        self.cameras = []
        for cam_id in sorted(groups):
            cam = rig.camera(cam_id)
            cam_from_rig = cam.rig_from_cam.inverse()
            self.cameras.append(
                (
                    np.array(groups[cam_id], dtype=int),
                    cam_from_rig.rotation(),
                    cam_from_rig.t,
                    cam.intrinsics,
                )
            )

    def subset(self, keep: np.ndarray) -> "_CorrespondenceBatch":
        sub = object.__new__(_CorrespondenceBatch)
        sub.points = self.points[keep]
        sub.pixels = self.pixels[keep]
        sub.weights = self.weights[keep]
        remap = -np.ones(keep.shape[0], dtype=int)
        remap[keep] = np.arange(int(keep.sum()))
        sub.cameras = []
        for idx, rot, trans, intr in self.cameras:
            kept = remap[idx]
            kept = kept[kept >= 0]
            if kept.size:
                sub.cameras.append((kept, rot, trans, intr))
        return sub

    def __len__(self) -> int:
        return self.points.shape[0]


def _pixel_residuals(pose_q, pose_t, batch: _CorrespondenceBatch):
    """Per-correspondence reprojection residual vectors (N, 2)."""
    y = quat_rotate(pose_q, batch.points) + pose_t
    out = np.empty((len(batch), 2))
    for idx, rot, trans, intr in batch.cameras:
        x_cam = y[idx] @ rot.T + trans
        px, valid = project_fisheye_many(x_cam, intr)
        px[~valid] = _BEHIND_PENALTY_PX
        out[idx] = px - batch.pixels[idx]
    return out


def _objective(res_norms, weights, scale):
    """Huber objective when scale is finite, plain quadratic otherwise."""
    if scale is None:
        return float(np.sum(weights * 0.5 * res_norms**2))
    rho = np.where(res_norms <= scale, 0.5 * res_norms**2, scale * (res_norms - 0.5 * scale))
    return float(np.sum(weights * rho))


def _apply_delta(pose_q, pose_t, delta, anchor):
    dq = rotvec_to_quat(delta[:3])
    q = quat_normalize(quat_multiply(dq, pose_q))
    t = quat_rotate(dq, pose_t - anchor) + anchor + delta[3:6]
    return q, t


def _lm_phase(q, t, batch: _CorrespondenceBatch, scale, max_iterations):
    """One LM descent; `scale` None means plain least squares."""
    weights = batch.weights

    def evaluate(q_, t_):
        res = _pixel_residuals(q_, t_, batch)
        norms = np.linalg.norm(res, axis=1)
        return _objective(norms, weights, scale), res, norms

    obj, res, norms = evaluate(q, t)
    if not np.isfinite(obj):
        raise NoConvergence("objective non-finite at the initial pose")
    mu = 1e-2
    for _ in range(max_iterations):
        if obj < 1e-24:
            break
        anchor = (quat_rotate(q, batch.points) + t).mean(axis=0)
        if scale is None:
            w_rob = weights
        else:
            # IRLS weights at the current residuals
            w_rob = weights * np.where(norms <= scale, 1.0, scale / np.maximum(norms, 1e-12))
        sqrt_w = np.sqrt(w_rob)
        # finite-difference Jacobian over the 6 increment parameters
        jac = np.empty((2 * len(batch), 6))
        for d in range(6):
            delta = np.zeros(6)
            delta[d] = _FD_EPS
            qp, tp = _apply_delta(q, t, delta, anchor)
            qm, tm = _apply_delta(q, t, -delta, anchor)
            rp = _pixel_residuals(qp, tp, batch)
            rm = _pixel_residuals(qm, tm, batch)
            jac[:, d] = ((rp - rm) / (2.0 * _FD_EPS) * sqrt_w[:, None]).reshape(-1)
        r = (res * sqrt_w[:, None]).reshape(-1)
        jtj = jac.T @ jac
        g = jac.T @ r
        diag = np.maximum(np.diag(jtj), 1e-12)
        accepted = False
        for _ in range(10):
            try:
                delta = np.linalg.solve(jtj + mu * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                mu *= 5.0
                continue
            q_new, t_new = _apply_delta(q, t, delta, anchor)
            obj_new, res_new, norms_new = evaluate(q_new, t_new)
            if obj_new < obj:
                step = float(np.linalg.norm(delta))
                rel_drop = (obj - obj_new) / max(obj, 1e-300)
                q, t, obj, res, norms = q_new, t_new, obj_new, res_new, norms_new
                mu = max(mu / 3.0, 1e-12)
                accepted = True
                if step < 1e-10 or rel_drop < 1e-12:
                    return q, t
                break
            mu *= 5.0
        if not accepted:
            break
    return q, t


def refine_pose(
    init: SE3Pose,
    correspondences: list[Correspondence],
    rig: CameraRig,
    model: ObjectModel,
    robust_scale: float = DEFAULT_HUBER_SCALE_PX,
    max_iterations: int = 100,
) -> tuple[SE3Pose, np.ndarray]:
    """Refine an object pose; returns (pose, per-correspondence residuals px).

    The Huber objective is nonincreasing across the accepted steps of the
    robust phase. Raises NoConvergence when there are fewer than 6
    correspondences or the objective is non-finite at the initial pose
    (the tracker then keeps the initial pose and forces the confidence
    below the redetect gate).
    """
    if len(correspondences) < MIN_CORRESPONDENCES:
        raise NoConvergence(f"refinement needs at least {MIN_CORRESPONDENCES} correspondences")
    batch = _CorrespondenceBatch(correspondences, rig, model)
    q, t = np.asarray(init.q, dtype=float), np.asarray(init.t, dtype=float)

    q, t = _lm_phase(q, t, batch, robust_scale, max_iterations)

    res = _pixel_residuals(q, t, batch)
    norms = np.linalg.norm(res, axis=1)
    inlier = norms <= TRIM_FACTOR * robust_scale
    if int(inlier.sum()) >= MIN_CORRESPONDENCES and not inlier.all():
        q, t = _lm_phase(q, t, batch.subset(inlier), None, max_iterations)
        res = _pixel_residuals(q, t, batch)
        norms = np.linalg.norm(res, axis=1)
    return SE3Pose(q, t), norms


def pose_confidence(residuals: np.ndarray, robust_scale: float = DEFAULT_HUBER_SCALE_PX) -> float:
    """(inlier fraction at 2*scale) * exp(-mean inlier residual / scale).

    Monotone in both factors; 1.0 for all-zero residuals, 0.0 when no
    residual is within the inlier band.
    """
    norms = np.asarray(residuals, dtype=float).reshape(-1)
    if norms.size == 0:
        return 0.0
    inlier = norms <= 2.0 * robust_scale
    if not inlier.any():
        return 0.0
    frac = float(inlier.mean())
    mean_inlier = float(norms[inlier].mean())
    return frac * float(np.exp(-mean_inlier / robust_scale))
