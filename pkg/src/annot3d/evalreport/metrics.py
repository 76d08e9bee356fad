"""Scalar annotation-quality metrics."""

from __future__ import annotations

import numpy as np

from ..errors import Empty, InvalidInput, NoValidJoints


def mpjpe(pred: np.ndarray, gt: np.ndarray, valid: np.ndarray | None = None) -> float:
    """Mean per-joint position error over valid joints, in millimeters.

    pred/gt are (21, 3) keypoint arrays in meters.
    """
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape:
        raise InvalidInput(f"shape mismatch {pred.shape} vs {gt.shape}")
    if valid is None:
        valid = np.ones(pred.shape[0], dtype=bool)
    valid = np.asarray(valid, dtype=bool)
    if not valid.any():
        raise NoValidJoints("MPJPE needs at least one valid joint")
    return float(np.mean(np.linalg.norm(pred[valid] - gt[valid], axis=1)) * 1000.0)


def percentile(values, q: float) -> float:
    """Percentile with linear interpolation between closest ranks.

    This is the convention used for every reported percentile (median,
    P90, P50 TE/RE): sorted values are treated as quantiles at positions
    i / (n - 1) and interpolated linearly between them.
    """
    arr = np.asarray(values, dtype=float).reshape(-1)
    if arr.size == 0:
        raise Empty("percentile of an empty sequence")
    if not 0.0 <= q <= 100.0:
        raise InvalidInput("percentile rank must be in [0, 100]")
    return float(np.percentile(arr, q, method="linear"))


def yield_rate(confidences, tau: float) -> float:
    """Fraction of confidences at or above the validity threshold."""
    arr = np.asarray(confidences, dtype=float).reshape(-1)
    if arr.size == 0:
        raise Empty("yield of an empty sequence")
    return float(np.mean(arr >= tau))
