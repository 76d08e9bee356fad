import numpy as np
import pytest

from annot3d.errors import InvalidInput, NoValidKeypoints, Unsolvable
from annot3d.fusion.detections import Hand
from annot3d.geometry.se3 import SE3Pose, quat_multiply, quat_normalize, rotvec_to_quat
from annot3d.hand.ik import (
    HandPose,
    IkConfig,
    hand_confidence,
    initial_pose_estimate,
    pose_acceleration,
    smooth_sequence,
    solve_ik,
)
from annot3d.hand.kinematics import keypoints_from_pose
from annot3d.hand.model import default_hand_model

from test_hand_model import random_pose

MODEL = default_hand_model()


def mpjpe_m(a, b):
    return float(np.mean(np.linalg.norm(a - b, axis=1)))


def perturbed(pose, rng, angle_deg=5.0, trans=0.01):
    delta_angles = np.deg2rad(rng.uniform(-angle_deg, angle_deg, size=pose.joint_angles.shape))
    w = rng.standard_normal(3)
    w *= np.deg2rad(angle_deg) / np.linalg.norm(w)
    q = quat_normalize(quat_multiply(rotvec_to_quat(w), pose.root.q))
    t = pose.root.t + rng.uniform(-trans, trans, size=3)
    return HandPose(root=SE3Pose(q, t), joint_angles=pose.joint_angles + delta_angles, hand=pose.hand)


class TestSolveIk:
    def test_true_init_zero_residual(self, rng):
        pose = random_pose(MODEL, rng, root_scale=0.5)
        targets = keypoints_from_pose(MODEL, pose)
        result = solve_ik(MODEL, targets, pose)
        assert result.ik_residual < 1e-9
        assert mpjpe_m(result.keypoints, targets) < 1e-9
        assert np.allclose(result.pose.joint_angles, pose.joint_angles, atol=1e-7)
        assert result.converged

    def test_perturbed_init_recovers(self, rng):
        for _ in range(5):
            pose = random_pose(MODEL, rng, root_scale=0.5)
            targets = keypoints_from_pose(MODEL, pose)
            init = perturbed(pose, rng)
            result = solve_ik(MODEL, targets, init)
            assert mpjpe_m(result.keypoints, targets) < 1e-4

    def test_masked_targets_still_converge(self, rng):
        pose = random_pose(MODEL, rng, root_scale=0.5)
        targets = keypoints_from_pose(MODEL, pose).copy()
        invalid = rng.choice(21, size=10, replace=False)
        targets[invalid] = np.nan
        result = solve_ik(MODEL, targets, perturbed(pose, rng))
        valid = np.setdiff1d(np.arange(21), invalid)
        err = np.linalg.norm(result.keypoints[valid] - keypoints_from_pose(MODEL, pose)[valid], axis=1)
        assert float(np.mean(err)) < 1e-4
        assert np.isnan(result.targets[invalid]).all()
        assert (result.target_weights[invalid] == 0.0).all()

    def test_too_few_targets_unsolvable(self, rng):
        pose = random_pose(MODEL, rng)
        targets = keypoints_from_pose(MODEL, pose).copy()
        targets[5:] = np.nan
        with pytest.raises(Unsolvable):
            solve_ik(MODEL, targets, pose)

    def test_confidence_weights_enter_objective(self, rng):
        # corrupting the wrist pulls the whole root; a tiny weight on the
        # corrupted target should leave the other keypoints in place while
        # a full weight drags them along
        pose = random_pose(MODEL, rng, root_scale=0.5)
        clean = keypoints_from_pose(MODEL, pose)
        targets = clean.copy()
        targets[0] += np.array([0.05, 0.0, 0.0])
        low_w = np.ones(21)
        low_w[0] = 1e-6
        guarded = solve_ik(MODEL, targets, pose, weights=low_w)
        dragged = solve_ik(MODEL, targets, pose)
        others = np.arange(1, 21)
        err_guarded = np.linalg.norm(guarded.keypoints[others] - clean[others], axis=1).mean()
        err_dragged = np.linalg.norm(dragged.keypoints[others] - clean[others], axis=1).mean()
        assert err_guarded < 1e-4
        assert err_dragged > 10.0 * err_guarded

    def test_output_angles_within_limits(self, rng):
        pose = random_pose(MODEL, rng, root_scale=0.5)
        targets = keypoints_from_pose(MODEL, pose) + rng.normal(0.0, 0.01, size=(21, 3))
        result = solve_ik(MODEL, targets, pose)
        lo, hi = MODEL.angle_limits[:, 0], MODEL.angle_limits[:, 1]
        assert np.all(result.pose.joint_angles >= lo - 1e-12)
        assert np.all(result.pose.joint_angles <= hi + 1e-12)


class TestColdStart:
    def test_rigid_alignment_recovers_root(self, rng):
        rest = HandPose(
            root=SE3Pose.identity(), joint_angles=np.zeros(MODEL.n_angles), hand=MODEL.side
        )
        g = SE3Pose(quat_normalize(rng.standard_normal(4)), rng.uniform(-0.3, 0.3, 3))
        targets = g.apply(keypoints_from_pose(MODEL, rest))
        init = initial_pose_estimate(MODEL, targets)
        assert mpjpe_m(keypoints_from_pose(MODEL, init), targets) < 1e-9

    def test_cold_start_plus_ik_converges(self, rng):
        pose = random_pose(MODEL, rng, root_scale=0.5)
        targets = keypoints_from_pose(MODEL, pose)
        init = initial_pose_estimate(MODEL, targets)
        result = solve_ik(MODEL, targets, init, cfg=IkConfig(max_iterations=100))
        assert mpjpe_m(result.keypoints, targets) < 1e-3


class TestSmoothing:
    def _solved_sequence(self, poses, spike_at=None, spike=0.02):
        frames = []
        for i, pose in enumerate(poses):
            targets = keypoints_from_pose(MODEL, pose).copy()
            if i == spike_at:
                targets += spike
            frames.append(solve_ik(MODEL, targets, pose))
        return frames

    def test_constant_sequence_unchanged(self, rng):
        pose = random_pose(MODEL, rng, root_scale=0.5)
        frames = self._solved_sequence([pose] * 5)
        smoothed = smooth_sequence(frames, 0.1, MODEL)
        for before, after in zip(frames, smoothed):
            assert np.allclose(after.pose.joint_angles, before.pose.joint_angles, atol=1e-9)
            assert np.allclose(after.pose.root.t, before.pose.root.t, atol=1e-9)

    def test_lambda_zero_identity(self, rng):
        poses = [random_pose(MODEL, rng, root_scale=0.3) for _ in range(4)]
        frames = self._solved_sequence(poses)
        smoothed = smooth_sequence(frames, 0.0, MODEL)
        for before, after in zip(frames, smoothed):
            assert after is before

    def test_short_sequence_unchanged(self, rng):
        poses = [random_pose(MODEL, rng, root_scale=0.3) for _ in range(2)]
        frames = self._solved_sequence(poses)
        assert smooth_sequence(frames, 0.1, MODEL) == frames

    def test_spike_acceleration_reduced(self, rng):
        base = random_pose(MODEL, rng, root_scale=0.3)
        frames = self._solved_sequence([base] * 7, spike_at=3)
        before_acc = pose_acceleration([f.pose for f in frames])
        smoothed = smooth_sequence(frames, 0.5, MODEL)
        after_acc = pose_acceleration([f.pose for f in smoothed])
        assert after_acc < before_acc
        # the data term may grow only by the configured trade-off
        for f in smoothed:
            assert f.ik_residual < 0.05


class TestHandConfidence:
    def test_perfect(self):
        assert hand_confidence([1.0, 1.0, 1.0], 0.0) == 1.0

    def test_declared_form(self):
        c = hand_confidence([0.8, 0.8], 0.005, sigma_r=0.005)
        assert c == pytest.approx(0.8 * np.exp(-1.0), abs=1e-12)

    def test_monotone_in_keypoint_confidence(self):
        base = hand_confidence([0.9, 0.9], 0.002)
        assert hand_confidence([0.9, 0.8], 0.002) < base

    def test_monotone_in_residual(self):
        assert hand_confidence([0.9], 0.004) < hand_confidence([0.9], 0.002)

    def test_errors(self):
        with pytest.raises(NoValidKeypoints):
            hand_confidence([], 0.0)
        with pytest.raises(InvalidInput):
            hand_confidence([0.5], -1.0)
