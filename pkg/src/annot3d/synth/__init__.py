"""Synthetic scenes with exact ground truth: the verification oracle."""

from .scene import (
    NoiseModel,
    gen_hand_sequence,
    gen_object_sequence,
    gen_rig,
    observe_keypoints,
    observe_landmarks,
)

__all__ = [
    "NoiseModel",
    "gen_hand_sequence",
    "gen_object_sequence",
    "gen_rig",
    "observe_keypoints",
    "observe_landmarks",
]
