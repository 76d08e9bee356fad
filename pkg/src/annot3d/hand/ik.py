"""Inverse kinematics on the skinned hand model.

solve_ik fits root pose + joint angles to triangulated 3D keypoints by
damped least squares (Levenberg-Marquardt) with the analytic keypoint
Jacobian, weighting each target by its triangulation confidence and
penalizing joint-limit violations quadratically. A second smoothing pass
re-solves each frame with an acceleration penalty on the pose parameter
vector [root translation, root quaternion (sign-aligned), joint angles],
holding neighbor frames fixed (coordinate descent over the sequence), so
the per-frame data term is unchanged.

The per-hand confidence is Bayesian-style: the product of the mean
keypoint confidence and exp(-r / sigma_r) for IK residual r.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInput, NoValidKeypoints, Unsolvable
from ..fusion.detections import Hand
from ..geometry.se3 import SE3Pose, quat_multiply
from .kinematics import apply_increment, keypoint_jacobian, keypoints_from_pose, skin
from .model import HandModel, N_KEYPOINTS

DEFAULT_SIGMA_R = 0.005  # meters


@dataclass(frozen=True, eq=False)
class HandPose:
    """Root transform (rig frame) + joint angles in the model's DOF order."""

    root: SE3Pose
    joint_angles: np.ndarray
    hand: Hand

    def __post_init__(self):
        angles = np.array(self.joint_angles, dtype=float).reshape(-1)
        angles.setflags(write=False)
        object.__setattr__(self, "joint_angles", angles)


@dataclass(frozen=True)
class IkConfig:
    max_iterations: int = 50
    step_tol: float = 1e-8
    rel_obj_tol: float = 1e-10
    limit_weight: float = 10.0
    sigma_r: float = DEFAULT_SIGMA_R
    min_valid_targets: int = 6


@dataclass(frozen=True, eq=False)
class HandFrameResult:
    """One solved hand frame; retains its targets so smoothing can re-solve."""

    pose: HandPose
    keypoints: np.ndarray       # (21, 3)
    mesh_vertices: np.ndarray   # (V, 3)
    ik_residual: float          # weighted RMS keypoint error, meters
    confidence: float
    targets: np.ndarray         # (21, 3), NaN where invalid
    target_weights: np.ndarray  # (21,), 0 where invalid
    converged: bool = True

    def __post_init__(self):
        for name, shape in (("keypoints", (N_KEYPOINTS, 3)), ("targets", (N_KEYPOINTS, 3)),
                            ("target_weights", (N_KEYPOINTS,))):
            arr = np.array(getattr(self, name), dtype=float).reshape(shape)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        mesh = np.array(self.mesh_vertices, dtype=float)
        mesh.setflags(write=False)
        object.__setattr__(self, "mesh_vertices", mesh)


def hand_confidence(keypoint_confidences, ik_residual: float, sigma_r: float = DEFAULT_SIGMA_R) -> float:
    """mean(C_k) * exp(-r / sigma_r); in (0, 1] for C_k in (0, 1]."""
    confs = np.asarray(keypoint_confidences, dtype=float).reshape(-1)
    if confs.size == 0:
        raise NoValidKeypoints("hand confidence needs at least one valid keypoint")
    if ik_residual < 0.0:
        raise InvalidInput("ik_residual must be nonnegative")
    if sigma_r <= 0.0:
        raise InvalidInput("sigma_r must be positive")
    return float(np.mean(confs) * np.exp(-ik_residual / sigma_r))


def _limit_residuals(angles: np.ndarray, limits: np.ndarray, weight: float):
    """Quadratic-penalty residuals sqrt(weight) * violation, plus d/d(angle)."""
    lo, hi = limits[:, 0], limits[:, 1]
    over = np.maximum(angles - hi, 0.0)
    under = np.maximum(lo - angles, 0.0)
    res = np.sqrt(weight) * (over - under)
    grad = np.sqrt(weight) * ((angles > hi).astype(float) + (angles < lo).astype(float))
    return res, grad


def _pose_vector(pose: HandPose, q_ref: np.ndarray | None = None) -> np.ndarray:
    """[t (3), q (4, sign-aligned to q_ref), angles (D)]."""
    q = np.asarray(pose.root.q, dtype=float)
    if q_ref is not None and float(q @ q_ref) < 0.0:
        q = -q
    return np.concatenate([pose.root.t, q, pose.joint_angles])


def _pose_vector_jacobian(pose: HandPose, sign: float, n_dof: int) -> np.ndarray:
    """d(pose vector)/d(increment) in the chart of keypoint_jacobian.

    With the anchor at the root translation, dt/dw = 0 and dt/dv = I;
    dq/dw_i = 0.5 * [0, e_i] (x) q (left quaternion multiplication).
    """
    jac = np.zeros((7 + n_dof, 6 + n_dof))
    jac[0:3, 3:6] = np.eye(3)
    q = pose.root.q
    for i in range(3):
        e = np.zeros(4)
        e[1 + i] = 1.0
        jac[3:7, i] = sign * 0.5 * quat_multiply(e, q)
    jac[7:, 6:] = np.eye(n_dof)
    return jac


def _solve_frame(
    model: HandModel,
    targets: np.ndarray,
    weights: np.ndarray,
    valid: np.ndarray,
    init: HandPose,
    cfg: IkConfig,
    accel_terms: list[tuple[float, np.ndarray, float]] | None = None,
) -> tuple[HandPose, bool]:
    """LM core. accel_terms: (coefficient, fixed_part, sqrt_lambda) blocks of
    residual sqrt_lambda * (coefficient * p(x) + fixed_part)."""
    n_dof = model.n_angles
    limits = model.angle_limits
    sqrt_w = np.sqrt(weights[valid])
    tgt = targets[valid]

    pose = init
    q_ref = np.asarray(init.root.q, dtype=float)

    def residuals_and_jac(p: HandPose, with_jac: bool):
        if with_jac:
            kps, jac_kp = keypoint_jacobian(model, p)
        else:
            kps, jac_kp = keypoints_from_pose(model, p), None
        data = (sqrt_w[:, None] * (kps[valid] - tgt)).reshape(-1)
        lim_res, lim_grad = _limit_residuals(p.joint_angles, limits, cfg.limit_weight)
        blocks = [data, lim_res]
        jac_blocks = []
        if with_jac:
            rows = np.repeat(valid, 3)
            jac_data = jac_kp[rows] * np.repeat(sqrt_w, 3)[:, None]
            jac_lim = np.zeros((n_dof, 6 + n_dof))
            jac_lim[:, 6:] = np.diag(lim_grad)
            jac_blocks = [jac_data, jac_lim]
        if accel_terms:
            sign = 1.0 if float(np.asarray(p.root.q) @ q_ref) >= 0.0 else -1.0
            pvec = _pose_vector(p, q_ref)
            for coef, fixed, sqrt_lam in accel_terms:
                blocks.append(sqrt_lam * (coef * pvec + fixed))
                if with_jac:
                    jac_blocks.append(sqrt_lam * coef * _pose_vector_jacobian(p, sign, n_dof))
        res = np.concatenate(blocks)
        return (res, np.vstack(jac_blocks)) if with_jac else (res, None)

    res, jac = residuals_and_jac(pose, True)
    obj = float(res @ res)
    mu = 1e-3
    converged = False
    for _ in range(cfg.max_iterations):
        if obj < 1e-26:
            converged = True
            break
        jtj = jac.T @ jac
        g = jac.T @ res
        diag = np.diag(jtj).copy()
        diag[diag < 1e-12] = 1e-12
        accepted = False
        for _ in range(12):
            try:
                delta = np.linalg.solve(jtj + mu * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                mu *= 4.0
                continue
            candidate = apply_increment(pose, delta)
            cand_res, _ = residuals_and_jac(candidate, False)
            cand_obj = float(cand_res @ cand_res)
            if cand_obj < obj:
                step = float(np.linalg.norm(delta))
                rel_drop = (obj - cand_obj) / max(obj, 1e-300)
                pose, obj = candidate, cand_obj
                res, jac = residuals_and_jac(pose, True)
                mu = max(mu / 3.0, 1e-12)
                accepted = True
                if step < cfg.step_tol or rel_drop < cfg.rel_obj_tol:
                    converged = True
                break
            mu *= 4.0
        if not accepted:
            converged = True  # damping saturated: local minimum reached
            break
        if converged:
            break
    return pose, converged


def solve_ik(
    model: HandModel,
    targets: np.ndarray,
    init: HandPose,
    weights: np.ndarray | None = None,
    valid: np.ndarray | None = None,
    cfg: IkConfig = IkConfig(),
) -> HandFrameResult:
    """Fit the hand model to 3D keypoint targets.

    targets: (21, 3), rows may be NaN for invalid keypoints; `valid` may
    also be given explicitly. `weights` are the keypoint confidences used
    both in the data term and in the hand confidence. Raises Unsolvable
    when fewer than `cfg.min_valid_targets` targets are valid. A frame
    that stops on the iteration budget is returned with converged=False;
    its large residual already drives the confidence down.
    """
    targets = np.asarray(targets, dtype=float).reshape(N_KEYPOINTS, 3)
    if valid is None:
        valid = ~np.isnan(targets).any(axis=1)
    valid = np.asarray(valid, dtype=bool).reshape(N_KEYPOINTS)
    if weights is None:
        weights = np.ones(N_KEYPOINTS)
    weights = np.where(valid, np.asarray(weights, dtype=float).reshape(N_KEYPOINTS), 0.0)
    if int(valid.sum()) < cfg.min_valid_targets:
        raise Unsolvable(f"only {int(valid.sum())} valid targets, need {cfg.min_valid_targets}")

    safe_targets = np.where(valid[:, None], targets, 0.0)
    pose, converged = _solve_frame(model, safe_targets, weights, valid, init, cfg)
    clamped = np.clip(pose.joint_angles, model.angle_limits[:, 0], model.angle_limits[:, 1])
    pose = HandPose(root=pose.root, joint_angles=clamped, hand=pose.hand)
    return _finish_frame(model, pose, safe_targets, weights, valid, cfg, converged)


def _finish_frame(model, pose, targets, weights, valid, cfg, converged) -> HandFrameResult:
    vertices, _ = skin(model, pose)
    keypoints = model.keypoint_regressor @ vertices
    err = keypoints[valid] - targets[valid]
    w = weights[valid]
    residual = float(np.sqrt(np.sum(w * np.sum(err * err, axis=1)) / np.sum(w)))
    confidence = hand_confidence(w, residual, cfg.sigma_r)
    out_targets = np.where(valid[:, None], targets, np.nan)
    return HandFrameResult(
        pose=pose,
        keypoints=keypoints,
        mesh_vertices=vertices,
        ik_residual=residual,
        confidence=confidence,
        targets=out_targets,
        target_weights=weights,
        converged=converged,
    )


def smooth_sequence(
    frames: list[HandFrameResult],
    lambda_t: float,
    model: HandModel,
    cfg: IkConfig = IkConfig(),
    sweeps: int = 2,
) -> list[HandFrameResult]:
    """Second pass: re-solve each frame with an acceleration penalty.

    Frames must be consecutive samples of one hand at a fixed rate. Each
    re-solve minimizes its original data/limit terms plus
    lambda_t * ||p_{t-1} - 2 p_t + p_{t+1}||^2 for every window touching
    the frame, neighbors held fixed (Gauss-Seidel sweeps over the
    sequence). Sequences shorter than 3 frames and lambda_t == 0 return
    the input unchanged.
    """
    if lambda_t < 0.0:
        raise InvalidInput("lambda_t must be nonnegative")
    if len(frames) < 3 or lambda_t == 0.0:
        return list(frames)
    results = list(frames)
    sqrt_lam = float(np.sqrt(lambda_t))
    n = len(results)
    for _ in range(sweeps):
        for t in range(n):
            current = results[t]
            q_ref = np.asarray(current.pose.root.q, dtype=float)
            pvecs = {
                s: _pose_vector(results[s].pose, q_ref)
                for s in range(max(0, t - 2), min(n, t + 3))
            }
            terms = []
            for w in (t - 1, t, t + 1):
                if not 1 <= w <= n - 2:
                    continue
                coef = {w - 1: 1.0, w: -2.0, w + 1: 1.0}
                fixed = np.zeros_like(pvecs[t])
                for s, c in coef.items():
                    if s != t:
                        fixed += c * pvecs[s]
                terms.append((coef[t], fixed, sqrt_lam))
            valid = current.target_weights > 0.0
            targets = np.where(valid[:, None], current.targets, 0.0)
            pose, converged = _solve_frame(
                model, targets, current.target_weights, valid, current.pose, cfg, accel_terms=terms
            )
            clamped = np.clip(pose.joint_angles, model.angle_limits[:, 0], model.angle_limits[:, 1])
            pose = HandPose(root=pose.root, joint_angles=clamped, hand=pose.hand)
            results[t] = _finish_frame(
                model, pose, targets, current.target_weights, valid, cfg, converged
            )
    return results


def pose_acceleration(poses: list[HandPose]) -> float:
    """Summed squared second difference of the pose parameter vector."""
    if len(poses) < 3:
        return 0.0
    q_ref = np.asarray(poses[0].root.q, dtype=float)
    vecs = []
    for p in poses:
        v = _pose_vector(p, q_ref)
        q_ref = v[3:7]
        vecs.append(v)
    arr = np.stack(vecs)
    acc = arr[:-2] - 2.0 * arr[1:-1] + arr[2:]
    return float(np.sum(acc * acc))


def initial_pose_estimate(
    model: HandModel,
    targets: np.ndarray,
    weights: np.ndarray | None = None,
    hand: Hand | None = None,
) -> HandPose:
    """Cold-start pose: weighted rigid (Kabsch) alignment of the rest
    keypoints to the valid targets, zero joint angles."""
    targets = np.asarray(targets, dtype=float).reshape(N_KEYPOINTS, 3)
    valid = ~np.isnan(targets).any(axis=1)
    if weights is None:
        weights = np.ones(N_KEYPOINTS)
    w = np.where(valid, np.asarray(weights, dtype=float), 0.0)
    if int(valid.sum()) < 3:
        raise Unsolvable("rigid alignment needs at least 3 valid targets")
    rest = HandPose(
        root=SE3Pose.identity(), joint_angles=np.zeros(model.n_angles), hand=hand or model.side
    )
    source = keypoints_from_pose(model, rest)
    w_sum = float(np.sum(w))
    mu_s = (w[:, None] * source).sum(axis=0) / w_sum
    mu_t = (w[:, None] * np.where(valid[:, None], targets, 0.0)).sum(axis=0) / w_sum
    src = source[valid] - mu_s
    tgt = targets[valid] - mu_t
    h = (w[valid, None] * src).T @ tgt
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    trans = mu_t - rot @ mu_s
    return HandPose(
        root=SE3Pose.from_matrix(rot, trans),
        joint_angles=np.zeros(model.n_angles),
        hand=hand or model.side,
    )
