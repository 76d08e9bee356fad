"""Fusion of 2D keypoint detections into confident 3D keypoints."""

from .detections import Detection2D, Hand, Source, format_detections_jsonl, parse_detections_jsonl
from .triangulation import Observation, pack_observations, reprojection_error, triangulate_dlt
from .ransac import Keypoint3D, RansacConfig, fuse_streams, keypoint_confidence, ransac_triangulate

__all__ = [
    "Detection2D",
    "Hand",
    "Source",
    "format_detections_jsonl",
    "parse_detections_jsonl",
    "Observation",
    "pack_observations",
    "reprojection_error",
    "triangulate_dlt",
    "Keypoint3D",
    "RansacConfig",
    "fuse_streams",
    "keypoint_confidence",
    "ransac_triangulate",
]
