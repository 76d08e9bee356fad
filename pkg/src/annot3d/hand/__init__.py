"""Skinned hand model, forward kinematics, and IK fitting."""

from .model import HandModel, JointSpec, default_hand_model, load_hand_model, parse_hand_model, save_hand_model
from .kinematics import apply_increment, forward_kinematics, keypoint_jacobian, keypoints_from_pose, skin
from .ik import (
    HandFrameResult,
    HandPose,
    IkConfig,
    hand_confidence,
    initial_pose_estimate,
    smooth_sequence,
    solve_ik,
)

__all__ = [
    "HandModel",
    "JointSpec",
    "default_hand_model",
    "load_hand_model",
    "parse_hand_model",
    "save_hand_model",
    "apply_increment",
    "forward_kinematics",
    "keypoint_jacobian",
    "keypoints_from_pose",
    "skin",
    "HandFrameResult",
    "HandPose",
    "IkConfig",
    "hand_confidence",
    "initial_pose_estimate",
    "smooth_sequence",
    "solve_ik",
]
