"""Refine-vs-redetect tracking state machine for one object sequence.

Policy: detection (gpnp from provider correspondences, then refinement)
runs only on the first frame of a sequence or when the previous frame's
confidence fell below the redetect threshold; otherwise only the refiner
runs, seeded with the previous pose. A failed detection yields LOST (no
pose) and detection is retried on subsequent frames. At most one tracked
instance exists per object id.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import Degenerate, InvalidInput, NoConvergence
from ..geometry.rig import CameraRig
from ..geometry.se3 import SE3Pose
from .gpnp import gpnp_solve
from .model import Correspondence, ObjectModel
from .refine import pose_confidence, refine_pose


class TrackMode(str, enum.Enum):
    DETECT = "detect"
    REFINE = "refine"
    LOST = "lost"


@dataclass(frozen=True)
class TrackParams:
    tau_redetect: float = 0.5
    huber_scale_px: float = 4.0
    max_iterations: int = 100
    gpnp_restarts: int = 20
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.tau_redetect <= 1.0:
            raise InvalidInput("tau_redetect must be in [0, 1]")


@dataclass(frozen=True)
class ObjectTrackState:
    mode: TrackMode
    pose: SE3Pose | None
    confidence: float | None
    frames_since_detect: int = 0

    def __post_init__(self):
        if (self.pose is None) != (self.mode == TrackMode.LOST):
            raise InvalidInput("pose must be present exactly when mode != LOST")
        if (self.confidence is None) != (self.pose is None):
            raise InvalidInput("confidence must be present exactly when pose is present")

    @staticmethod
    def initial() -> "ObjectTrackState":
        """State before any frame: no pose yet, so the first step detects."""
        return ObjectTrackState(mode=TrackMode.LOST, pose=None, confidence=None, frames_since_detect=0)


DetectProvider = Callable[[], "list[Correspondence] | None"]


def track_step(
    state: ObjectTrackState,
    correspondences: list[Correspondence],
    *,
    rig: CameraRig,
    model: ObjectModel,
    detect_provider: DetectProvider,
    params: TrackParams = TrackParams(),
) -> ObjectTrackState:
    """Advance the tracker by one frame.

    Failures are encoded in the returned mode, never raised: a refine
    failure keeps the previous pose with zero confidence (forcing a
    redetect next frame); a detect failure yields LOST.
    """
    take_refine_path = (
        state.pose is not None
        and state.confidence is not None
        and state.confidence >= params.tau_redetect
    )
    if take_refine_path:
        try:
            pose, residuals = refine_pose(
                state.pose, correspondences, rig, model,
                robust_scale=params.huber_scale_px, max_iterations=params.max_iterations,
            )
            conf = pose_confidence(residuals, params.huber_scale_px)
        except NoConvergence:
            pose, conf = state.pose, 0.0
        return ObjectTrackState(
            mode=TrackMode.REFINE,
            pose=pose,
            confidence=conf,
            frames_since_detect=state.frames_since_detect + 1,
        )

    # DETECT path: provider correspondences -> gpnp -> refine on the frame
    try:
        detect_corr = detect_provider()
        if not detect_corr:
            raise Degenerate("detection provider returned no correspondences")
        coarse = gpnp_solve(
            detect_corr, rig, model, restarts=params.gpnp_restarts, seed=params.seed
        )
        pose, residuals = refine_pose(
            coarse, correspondences or detect_corr, rig, model,
            robust_scale=params.huber_scale_px, max_iterations=params.max_iterations,
        )
        conf = pose_confidence(residuals, params.huber_scale_px)
    except (Degenerate, NoConvergence):
        return ObjectTrackState(
            mode=TrackMode.LOST,
            pose=None,
            confidence=None,
            frames_since_detect=state.frames_since_detect + 1,
        )
    return ObjectTrackState(
        mode=TrackMode.DETECT, pose=pose, confidence=conf, frames_since_detect=0
    )
