"""Multi-view 6DoF object pose estimation and tracking."""

from .model import Correspondence, ObjectModel, load_object_model, parse_obj, parse_correspondences_jsonl, format_correspondences_jsonl
from .gpnp import gpnp_solve
from .refine import pose_confidence, refine_pose
from .track import ObjectTrackState, TrackMode, TrackParams, track_step
from .metrics import rotation_error, translation_error

__all__ = [
    "Correspondence",
    "ObjectModel",
    "load_object_model",
    "parse_obj",
    "parse_correspondences_jsonl",
    "format_correspondences_jsonl",
    "gpnp_solve",
    "pose_confidence",
    "refine_pose",
    "ObjectTrackState",
    "TrackMode",
    "TrackParams",
    "track_step",
    "rotation_error",
    "translation_error",
]
