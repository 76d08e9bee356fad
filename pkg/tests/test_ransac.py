import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from annot3d.errors import InsufficientInliers, InvalidInput
from annot3d.fusion.detections import Detection2D, Hand, Source
from annot3d.fusion.ransac import (
    RansacConfig,
    fuse_streams,
    keypoint_confidence,
    ransac_triangulate,
)
from annot3d.geometry.cameras import project_pinhole

from test_triangulation import observe_exact, pinhole_ring

CFG = RansacConfig()


class TestKeypointConfidence:
    def test_direct_evaluation_at_threshold_count(self):
        cfg = RansacConfig(e_T=8.0, i_T=2, gamma=1.0)
        assert keypoint_confidence(4.0, cfg.i_T, cfg) == pytest.approx(0.5, abs=1e-12)

    def test_direct_evaluation_reward(self):
        cfg = RansacConfig(e_T=8.0, i_T=2, gamma=1.0)
        assert keypoint_confidence(4.0, cfg.i_T + 2, cfg) == pytest.approx(0.5 ** 0.5, abs=1e-12)

    def test_zero_error_clamped_below_one(self):
        c = keypoint_confidence(0.0, 5, CFG)
        assert c == 1.0 - 1e-12

    def test_error_at_threshold_rejected(self):
        with pytest.raises(InvalidInput):
            keypoint_confidence(8.0, 5, CFG)
        with pytest.raises(InvalidInput):
            keypoint_confidence(-0.1, 5, CFG)

    def test_count_below_threshold_rejected(self):
        with pytest.raises(InvalidInput):
            keypoint_confidence(1.0, 1, CFG)

    def test_monotone_grid(self):
        cfg = RansacConfig(e_T=8.0, i_T=2, gamma=1.5)
        errs = np.linspace(0.5, 7.5, 25)
        counts = range(2, 12)
        for i in counts:
            cs = [keypoint_confidence(e, i, cfg) for e in errs]
            assert all(a > b for a, b in zip(cs, cs[1:])), "strictly decreasing in e_rep"
        for e in errs:
            cs = [keypoint_confidence(e, i, cfg) for i in counts]
            assert all(a <= b for a, b in zip(cs, cs[1:])), "nondecreasing in i"
            # strict once the exponent guard stops clamping
            assert all(a < b for a, b in zip(cs[1:], cs[2:]))


class TestRansacTriangulate:
    def test_all_inliers_exact(self, rng):
        views = pinhole_ring(8)
        point = np.array([0.07, -0.03, 0.05])
        kp = ransac_triangulate(observe_exact(views, point), CFG)
        assert kp.inliers == 8
        assert np.linalg.norm(kp.position - point) < 1e-9
        assert kp.confidence == 1.0 - 1e-12  # zero reprojection error

    def test_gross_outliers_excluded(self, rng):
        views = pinhole_ring(8)
        point = np.array([0.02, 0.04, -0.06])
        obs = observe_exact(views, point)
        clean = ransac_triangulate(obs, CFG)
        corrupted = list(obs)
        for idx in (2, 5):
            v, px = corrupted[idx]
            corrupted[idx] = (v, px + np.array([50.0, 0.0]))
        kp = ransac_triangulate(corrupted, CFG)
        assert kp.inliers == 6
        assert set(kp.inlier_indices) == {0, 1, 3, 4, 6, 7}
        assert np.linalg.norm(kp.position - clean.position) < 1e-9

    def test_mutually_inconsistent_views(self, rng):
        # Three views whose pairwise triangulations disagree: with i_T=3 no
        # hypothesis can reach consensus (a 2-view hypothesis always
        # supports itself, so i_T=2 cannot express this rejection).
        views = pinhole_ring(3)
        point = np.array([0.0, 0.0, 0.0])
        obs = observe_exact(views, point)
        offsets = [np.array([40.0, 0.0]), np.array([-25.0, 30.0]), np.array([0.0, -45.0])]
        skewed = [(v, px + off) for (v, px), off in zip(obs, offsets)]
        with pytest.raises(InsufficientInliers):
            ransac_triangulate(skewed, RansacConfig(i_T=3))

    def test_single_camera_rejected(self):
        views = pinhole_ring(3)
        point = np.zeros(3)
        (v, px), *_ = observe_exact(views, point)
        with pytest.raises(InsufficientInliers):
            ransac_triangulate([(v, px), (v, px + 1.0)], CFG)

    def test_deterministic_bit_identical(self, rng):
        views = pinhole_ring(12)
        point = np.array([0.01, 0.02, 0.03])
        obs = [(v, px + rng.normal(0, 1, 2)) for v, px in observe_exact(views, point)]
        # 66 candidate pairs > iterations=50 forces the sampled branch
        cfg = RansacConfig(iterations=50, seed=7)
        a = ransac_triangulate(obs, cfg)
        b = ransac_triangulate(obs, cfg)
        assert a.position.tobytes() == b.position.tobytes()
        assert a.inliers == b.inliers
        assert a.confidence == b.confidence

    def test_outlier_error_within_noise_floor(self):
        # planted gross outliers leave the recovered position within 3x the
        # clean-only noise floor, statistically over 100 seeds
        views = pinhole_ring(10)
        point = np.array([0.05, -0.02, 0.01])
        base = observe_exact(views, point)
        clean_errs, outlier_errs = [], []
        for seed in range(100):
            case = np.random.default_rng(seed)
            noisy = [(v, px + case.normal(0.0, 1.0, 2)) for v, px in base]
            clean_errs.append(
                np.linalg.norm(ransac_triangulate(noisy, CFG).position - point)
            )
            corrupted = list(noisy)
            for idx in case.choice(10, size=3, replace=False):
                v, px = corrupted[idx]
                angle = case.uniform(0.0, 2.0 * np.pi)
                corrupted[idx] = (v, px + 60.0 * np.array([np.cos(angle), np.sin(angle)]))
            outlier_errs.append(
                np.linalg.norm(ransac_triangulate(corrupted, CFG).position - point)
            )
        assert np.mean(outlier_errs) < 3.0 * np.mean(clean_errs)

    def test_noise_degrades_monotonically(self):
        views = pinhole_ring(8)
        point = np.array([0.03, -0.01, 0.02])
        obs = observe_exact(views, point)
        mean_err = []
        for sigma in (0.0, 0.5, 1.0, 2.0, 4.0):
            errs = []
            for seed in range(30):
                noise_rng = np.random.default_rng(seed)
                noisy = [(v, px + noise_rng.normal(0.0, sigma, 2)) for v, px in obs]
                kp = ransac_triangulate(noisy, RansacConfig(e_T=20.0))
                errs.append(np.linalg.norm(kp.position - point))
            mean_err.append(np.mean(errs))
        assert all(a <= b + 1e-12 for a, b in zip(mean_err, mean_err[1:]))


class TestFuseStreams:
    def _detections(self, views, point, source, rng=None, corrupt=False):
        dets = []
        for v in views:
            px = project_pinhole(v.rig_from_cam.inverse().apply(point), v.intrinsics)
            if corrupt:
                px = px + rng.uniform(30.0, 60.0, size=2)
            dets.append(
                Detection2D(
                    camera_id=v.camera_id,
                    keypoint_id=4,
                    hand=Hand.RIGHT,
                    pixel=px,
                    score=0.9,
                    source=source,
                )
            )
        return dets

    def test_agreeing_streams_double_pool(self):
        views = pinhole_ring(6)
        point = np.array([0.02, 0.0, 0.01])
        full = self._detections(views, point, Source.FULLFRAME)
        crop = self._detections(views, point, Source.CROP)
        pools = fuse_streams(full, crop)
        assert set(pools) == {(Hand.RIGHT, 4)}
        assert len(pools[(Hand.RIGHT, 4)]) == 12
        by_view = {v.camera_id: v for v in views}
        obs = [(by_view[d.camera_id], d.pixel) for d in pools[(Hand.RIGHT, 4)]]
        kp = ransac_triangulate(obs, CFG)
        assert kp.inliers == 12
        assert np.linalg.norm(kp.position - point) < 1e-9

    def test_single_stream_passthrough(self):
        views = pinhole_ring(6)
        point = np.array([0.02, 0.0, 0.01])
        full = self._detections(views, point, Source.FULLFRAME)
        pools = fuse_streams(full, [])
        assert len(pools[(Hand.RIGHT, 4)]) == 6

    def test_corrupted_stream_rescued_by_clean_stream(self, rng):
        views = pinhole_ring(6)
        point = np.array([0.02, 0.0, 0.01])
        full = self._detections(views, point, Source.FULLFRAME, rng=rng, corrupt=True)
        crop = self._detections(views, point, Source.CROP)
        pools = fuse_streams(full, crop)
        by_view = {v.camera_id: v for v in views}
        obs = [(by_view[d.camera_id], d.pixel) for d in pools[(Hand.RIGHT, 4)]]
        kp = ransac_triangulate(obs, CFG)
        assert np.linalg.norm(kp.position - point) < 1e-9
        assert kp.inliers == 6


def test_config_validation():
    with pytest.raises(InvalidInput):
        RansacConfig(e_T=0.0)
    with pytest.raises(InvalidInput):
        RansacConfig(i_T=1)
    with pytest.raises(InvalidInput):
        RansacConfig(gamma=0.0)


@settings(max_examples=200, deadline=None)
@given(
    e_rep=st.floats(min_value=0.0, max_value=7.99, exclude_max=True),
    i=st.integers(min_value=2, max_value=30),
    gamma=st.floats(min_value=0.05, max_value=5.0),
)
def test_confidence_range_and_bounds_property(e_rep, i, gamma):
    cfg = RansacConfig(e_T=8.0, gamma=gamma)
    c = keypoint_confidence(e_rep, i, cfg)
    assert 0.0 < c < 1.0
    # more inliers never hurt; a worse reprojection error never helps
    assert keypoint_confidence(e_rep, i + 1, cfg) >= c
    if e_rep + 0.5 < cfg.e_T:
        assert keypoint_confidence(e_rep + 0.5, i, cfg) < c
