"""Marker-less multi-view 3D hand and object annotation toolkit.

Turns calibrated multi-camera 2D observations into 3D annotations:
RANSAC triangulation of fused keypoint detections with per-keypoint
confidences, inverse-kinematics fitting of a skinned hand model,
multi-view 6DoF object pose tracking, hand-object interaction fields
and contact maps, mesh projection masks, a synthetic-scene oracle for
verification, and an annotation-quality evaluation harness.

The package is exposed three ways: as a library (subpackages below), as
a FastAPI service (``annot3d.service``), and through a thin CLI client
(``annot3d.cli``).
"""

__version__ = "0.1.0"
