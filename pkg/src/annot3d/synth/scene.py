"""Synthetic rigs, motions, and noisy observations with exact ground truth.

Geometry is idealized: exocentric cameras sit on a half-dome of the given
radius aimed exactly at the working-volume origin (a 0.6 m cube centered
there), and the two egocentric cameras sit at a head position above and
behind the volume with a small stereo baseline. Every generated quantity
is a deterministic function of the seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInput
from ..geometry.cameras import FisheyeIntrinsics, project_fisheye_many
from ..geometry.rig import CameraRig, RigCamera
from ..geometry.se3 import SE3Pose, rotvec_to_quat

WORKING_VOLUME_M = 0.6

_SYNTH_INTRINSICS = dict(
    fx=480.0, fy=480.0, cx=639.5, cy=511.5, k=(-0.01, 0.0005, 0.0, 0.0), width=1280, height=1024
)


@dataclass(frozen=True)
class NoiseModel:
    """Observation degradation: Gaussian pixel noise, gross outliers, dropout."""

    pixel_sigma: float = 0.0
    outlier_rate: float = 0.0
    outlier_magnitude: float = 50.0
    dropout_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.outlier_rate < 1.0 and 0.0 <= self.dropout_rate < 1.0):
            raise InvalidInput("outlier_rate and dropout_rate must be in [0, 1)")
        if self.pixel_sigma < 0.0:
            raise InvalidInput("pixel_sigma must be nonnegative")


def _aimed_at_origin(position: np.ndarray) -> SE3Pose:
    """Camera pose whose optical axis passes exactly through the origin."""
    z = -position / np.linalg.norm(position)
    up = np.array([0.0, 0.0, 1.0])
    if abs(float(z @ up)) > 0.99:
        up = np.array([0.0, 1.0, 0.0])
    x = np.cross(up, z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    rotation = np.stack([x, y, z], axis=1)
    return SE3Pose.from_matrix(rotation, position)


def gen_rig(n_exo: int = 8, n_ego: int = 2, radius_m: float = 0.9) -> CameraRig:
    """Half-dome rig: `n_exo` cameras on a hemisphere plus `n_ego` head cameras.

    All optical axes pass through the working-volume origin.
    """
    if n_exo < 2:
        raise InvalidInput("need at least 2 exocentric cameras")
    intr = FisheyeIntrinsics(**_SYNTH_INTRINSICS)
    cameras = []
    # Fibonacci spiral over the upper hemisphere keeps the views spread out.
    golden = np.pi * (3.0 - np.sqrt(5.0))
    for i in range(n_exo):
        zfrac = 0.15 + 0.75 * (i + 0.5) / n_exo
        ring = np.sqrt(max(0.0, 1.0 - zfrac * zfrac))
        azimuth = golden * i
        pos = radius_m * np.array([ring * np.cos(azimuth), ring * np.sin(azimuth), zfrac])
        cameras.append(RigCamera(id=f"exo{i}", intrinsics=intr, rig_from_cam=_aimed_at_origin(pos)))
    ego_ids = []
    head = radius_m * np.array([0.0, -0.85, 0.55])
    baseline = np.array([0.03, 0.0, 0.0])
    for j in range(n_ego):
        offset = baseline * (j - 0.5 * (n_ego - 1))
        cam_id = f"ego{j}"
        cameras.append(
            RigCamera(id=cam_id, intrinsics=intr, rig_from_cam=_aimed_at_origin(head + offset))
        )
        ego_ids.append(cam_id)
    return CameraRig(cameras=tuple(cameras), ego_ids=frozenset(ego_ids))


def gen_object_sequence(n_frames: int, *, seed: int = 0, amplitude: float = 0.1) -> list[SE3Pose]:
    """Smooth 6DoF trajectory inside the working volume (band-limited sinusoids)."""
    rng = np.random.default_rng(seed)
    freqs = rng.uniform(0.2, 0.8, size=6)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=6)
    t = np.arange(n_frames) / 60.0
    poses = []
    for ti in t:
        trans = amplitude * np.sin(2.0 * np.pi * freqs[:3] * ti + phases[:3])
        rotvec = 0.6 * np.sin(2.0 * np.pi * freqs[3:] * ti + phases[3:])
        poses.append(SE3Pose(rotvec_to_quat(rotvec), trans))
    return poses


def gen_hand_sequence(model, n_frames: int, amplitude: float = 0.5, seed: int = 0):
    """Smooth hand motion: (poses, keypoints (n_frames, 21, 3)).

    Joint angles follow per-DOF sinusoids centered at mid-limits with
    amplitude `amplitude` (fraction of the half limit range, in [0, 1]);
    the root translates and rotates smoothly inside the working volume.
    Keypoints are exact forward kinematics of the returned poses.
    """
    from ..hand.ik import HandPose
    from ..hand.kinematics import keypoints_from_pose

    if not 0.0 <= amplitude <= 1.0:
        raise InvalidInput("amplitude is a fraction of the joint limit half-range")
    rng = np.random.default_rng(seed)
    n_dof = model.n_angles
    lo, hi = model.angle_limits[:, 0], model.angle_limits[:, 1]
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    amp = amplitude * half * rng.uniform(0.3, 1.0, size=n_dof)
    freqs = rng.uniform(0.3, 1.2, size=n_dof)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=n_dof)
    root_freqs = rng.uniform(0.2, 0.6, size=6)
    root_phases = rng.uniform(0.0, 2.0 * np.pi, size=6)
    root_center = rng.uniform(-0.05, 0.05, size=3)

    poses = []
    keypoints = np.empty((n_frames, 21, 3))
    for f in range(n_frames):
        ti = f / 60.0
        angles = center + amp * np.sin(2.0 * np.pi * freqs * ti + phases)
        trans = root_center + (0.12 * amplitude) * np.sin(
            2.0 * np.pi * root_freqs[:3] * ti + root_phases[:3]
        )
        rotvec = (0.8 * amplitude) * np.sin(2.0 * np.pi * root_freqs[3:] * ti + root_phases[3:])
        pose = HandPose(
            root=SE3Pose(rotvec_to_quat(rotvec), trans), joint_angles=angles, hand=model.side
        )
        poses.append(pose)
        keypoints[f] = keypoints_from_pose(model, pose)
    return poses, keypoints


def _observe_points(
    points_rig: np.ndarray, rig: CameraRig, noise: NoiseModel, rng: np.random.Generator
) -> list[tuple[str, int, np.ndarray]]:
    """Project rig-frame points into every camera with the noise model applied.

    Returns (camera_id, point_index, pixel) triples; out-of-FOV points and
    dropped observations are omitted. Draw order is fixed (camera-major,
    then point) so output is deterministic for a given generator state.
    """
    out = []
    for cam in rig.cameras:
        pts_cam = cam.rig_from_cam.inverse().apply(points_rig)
        px, valid = project_fisheye_many(pts_cam, cam.intrinsics)
        in_bounds = (
            valid
            & (px[:, 0] >= 0.0)
            & (px[:, 0] < cam.intrinsics.width)
            & (px[:, 1] >= 0.0)
            & (px[:, 1] < cam.intrinsics.height)
        )
        n = points_rig.shape[0]
        drop = rng.random(n) < noise.dropout_rate
        gauss = rng.normal(0.0, noise.pixel_sigma, size=(n, 2)) if noise.pixel_sigma > 0 else np.zeros((n, 2))
        is_outlier = rng.random(n) < noise.outlier_rate
        directions = rng.uniform(0.0, 2.0 * np.pi, size=n)
        for i in range(n):
            if not in_bounds[i] or drop[i]:
                continue
            pixel = px[i] + gauss[i]
            if is_outlier[i]:
                pixel = pixel + noise.outlier_magnitude * np.array(
                    [np.cos(directions[i]), np.sin(directions[i])]
                )
            out.append((cam.id, i, pixel))
    return out


def observe_keypoints(
    keypoints_rig: np.ndarray, rig: CameraRig, noise: NoiseModel, rng: np.random.Generator
) -> list[tuple[str, int, np.ndarray]]:
    """Noisy fisheye-pixel observations of (K, 3) rig-frame keypoints."""
    return _observe_points(np.asarray(keypoints_rig, dtype=float), rig, noise, rng)


def observe_landmarks(
    landmarks_rig: np.ndarray, rig: CameraRig, noise: NoiseModel, rng: np.random.Generator
) -> list[tuple[str, int, np.ndarray]]:
    """Noisy fisheye-pixel observations of posed object landmarks."""
    return _observe_points(np.asarray(landmarks_rig, dtype=float), rig, noise, rng)
