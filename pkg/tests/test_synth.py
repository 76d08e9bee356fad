import numpy as np
import pytest

from annot3d.errors import InvalidInput
from annot3d.fusion.detections import parse_detections_jsonl
from annot3d.geometry.cameras import project_fisheye
from annot3d.hand.ik import HandPose
from annot3d.hand.kinematics import keypoints_from_pose
from annot3d.hand.model import default_hand_model
from annot3d.objpose.model import parse_correspondences_jsonl
from annot3d.pipeline.config import PipelineConfig
from annot3d.pipeline.formats import parse_gt
from annot3d.pipeline.stages import stage_synth
from annot3d.synth.scene import NoiseModel, gen_hand_sequence, gen_rig, observe_keypoints

MODEL = default_hand_model()


class TestHandSequence:
    def test_zero_amplitude_constant(self):
        poses, keypoints = gen_hand_sequence(MODEL, 10, amplitude=0.0, seed=3)
        for pose in poses[1:]:
            assert np.allclose(pose.joint_angles, poses[0].joint_angles)
            assert np.allclose(pose.root.t, poses[0].root.t)
        assert np.allclose(keypoints[0], keypoints[-1])

    def test_keypoints_match_fk_bit_exact(self):
        poses, keypoints = gen_hand_sequence(MODEL, 8, amplitude=0.6, seed=4)
        for pose, kps in zip(poses, keypoints):
            again = keypoints_from_pose(MODEL, pose)
            assert again.tobytes() == kps.tobytes()

    def test_two_seconds_at_60hz(self):
        poses, keypoints = gen_hand_sequence(MODEL, 120, amplitude=0.5, seed=5)
        assert len(poses) == 120 and keypoints.shape == (120, 21, 3)

    def test_angles_respect_limits(self):
        poses, _ = gen_hand_sequence(MODEL, 60, amplitude=1.0, seed=6)
        lo, hi = MODEL.angle_limits[:, 0], MODEL.angle_limits[:, 1]
        for pose in poses:
            assert np.all(pose.joint_angles >= lo - 1e-12)
            assert np.all(pose.joint_angles <= hi + 1e-12)

    def test_amplitude_validated(self):
        with pytest.raises(InvalidInput):
            gen_hand_sequence(MODEL, 5, amplitude=1.5, seed=0)


class TestObserve:
    def test_zero_noise_exact_reprojection(self, rig10, rng):
        points = rng.uniform(-0.2, 0.2, size=(21, 3))
        observed = observe_keypoints(points, rig10, NoiseModel(), rng)
        assert observed
        for cam_id, idx, pixel in observed:
            cam = rig10.camera(cam_id)
            expected = project_fisheye(cam.rig_from_cam.inverse().apply(points[idx]), cam.intrinsics)
            assert np.allclose(pixel, expected, atol=1e-12)

    def test_outlier_rate_statistics(self, rig10):
        # outlier offsets are 50 px; count observations displaced that far
        points = np.zeros((50, 3))
        noise = NoiseModel(outlier_rate=0.2, outlier_magnitude=50.0)
        rng = np.random.default_rng(0)
        clean_rng = np.random.default_rng(0)
        total, outliers = 0, 0
        for _ in range(30):
            noisy = observe_keypoints(points, rig10, noise, rng)
            clean = observe_keypoints(points, rig10, NoiseModel(), clean_rng)
            clean_px = {(c, i): px for c, i, px in clean}
            for cam_id, idx, pixel in noisy:
                total += 1
                if np.linalg.norm(pixel - clean_px[(cam_id, idx)]) > 25.0:
                    outliers += 1
        assert total >= 10_000
        assert abs(outliers / total - 0.2) < 0.01

    def test_dropout_rate(self, rig10):
        points = np.zeros((100, 3))
        rng = np.random.default_rng(1)
        kept = len(observe_keypoints(points, rig10, NoiseModel(dropout_rate=0.3), rng))
        base_rng = np.random.default_rng(1)
        base = len(observe_keypoints(points, rig10, NoiseModel(), base_rng))
        assert abs(kept / base - 0.7) < 0.05

    def test_same_seed_identical(self, rig10):
        points = np.random.default_rng(2).uniform(-0.2, 0.2, size=(21, 3))
        noise = NoiseModel(pixel_sigma=1.0, outlier_rate=0.1, dropout_rate=0.1)
        a = observe_keypoints(points, rig10, noise, np.random.default_rng(77))
        b = observe_keypoints(points, rig10, noise, np.random.default_rng(77))
        assert len(a) == len(b)
        for (ca, ia, pa), (cb, ib, pb) in zip(a, b):
            assert ca == cb and ia == ib and pa.tobytes() == pb.tobytes()


class TestSceneGeneration:
    CFG = PipelineConfig.from_dict(
        {"seed": 3, "synth": {"n_frames": 4, "n_exo": 4, "n_ego": 1, "noise": {"pixel_sigma": 0.5}}}
    )

    def test_emits_parseable_formats(self):
        result = stage_synth(self.CFG)
        detections = parse_detections_jsonl(result.files["detections.jsonl"].decode())
        assert set(detections) == {0, 1, 2, 3}
        corr = parse_correspondences_jsonl(result.files["correspondences.jsonl"].decode())
        assert set(corr) == {0, 1, 2, 3}
        gt, raw = parse_gt(result.files["gt.jsonl"].decode())
        assert set(gt) == {0, 1, 2, 3}
        assert set(gt[0].hand_keypoints) == {"left", "right"}
        assert set(gt[0].object_poses) == {"toy"}

    def test_gt_keypoints_consistent_with_pose_params(self):
        result = stage_synth(self.CFG)
        gt, raw = parse_gt(result.files["gt.jsonl"].decode())
        from annot3d.pipeline.formats import hand_pose_from_record
        from annot3d.fusion.detections import Hand

        left = default_hand_model(Hand.LEFT)
        pose = hand_pose_from_record(raw[2]["hands"]["left"], "left")
        assert np.allclose(keypoints_from_pose(left, pose), gt[2].hand_keypoints["left"], atol=1e-9)

    def test_byte_identical_regeneration(self):
        a = stage_synth(self.CFG)
        b = stage_synth(self.CFG)
        assert set(a.files) == set(b.files)
        for name in a.files:
            assert a.files[name] == b.files[name], name
