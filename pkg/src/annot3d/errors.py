"""Exception hierarchy shared across the toolkit."""

from __future__ import annotations


class AnnotationError(Exception):
    """Base class for all toolkit errors."""


class InvalidInput(AnnotationError, ValueError):
    """An argument violates a documented precondition."""


class BehindCamera(AnnotationError):
    """Point lies outside the modeled field of view of a camera."""


class NoConvergence(AnnotationError):
    """An iterative solver exhausted its iteration budget."""


class OutsideCrop(AnnotationError):
    """A warped detection falls outside a perspective crop."""


class DegenerateGeometry(AnnotationError):
    """Observation geometry too degenerate to solve (near-parallel rays,
    too few or near-collinear points)."""


# Object-pose operations use the shorter name.
Degenerate = DegenerateGeometry


class InsufficientInliers(AnnotationError):
    """RANSAC consensus fell below the inlier count threshold."""


class Unsolvable(AnnotationError):
    """Too few valid targets to pose a hand frame."""


class NoValidKeypoints(AnnotationError):
    """A per-hand confidence was requested with no valid keypoints."""


class NoValidJoints(AnnotationError):
    """MPJPE requested with an all-false validity mask."""


class EmptyMesh(AnnotationError):
    """A mesh operation received an empty vertex set."""


class Empty(AnnotationError, ValueError):
    """A statistic was requested on an empty sequence."""


class LengthMismatch(AnnotationError):
    """Sequence lengths disagree (or a sequence is too short)."""


class DimensionMismatch(AnnotationError):
    """Image or mask dimensions disagree."""


class FrameMismatch(AnnotationError):
    """Prediction and ground-truth streams disagree on frame ids."""


class InputFormatError(AnnotationError):
    """A data file is malformed. Carries the offending location."""

    def __init__(self, message: str, *, source: str = "", line: int | None = None):
        self.source = source
        self.line = line
        self.bare_message = message
        where = source or "input"
        if line is not None:
            where = f"{where}:{line}"
        super().__init__(f"{where}: {message}")
