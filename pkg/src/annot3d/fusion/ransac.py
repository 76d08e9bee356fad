"""RANSAC triangulation with inlier-count/reprojection confidences.

The fused observation pool for one keypoint (both detector streams, all
views) is reduced to a 3D point by sampling two-view hypotheses, scoring
inliers by reprojection error, and re-triangulating from the best inlier
set. The confidence of the result rewards a large inlier count i and a
small average reprojection error e_rep over inlier views:

    E_rep = (e_T - e_rep) / e_T
    C     = E_rep ** (gamma / max(1, i - i_T))

with e_T the inlier reprojection threshold, i_T the inlier count
threshold, and gamma > 0 a reward shaping parameter. C is clamped to
[1e-12, 1 - 1e-12] so downstream products and logs stay finite.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from ..errors import DegenerateGeometry, InsufficientInliers, InvalidInput
from .detections import Detection2D, Hand
from .triangulation import (
    Observation,
    PackedObservations,
    pack_observations,
    reprojection_errors,
    triangulate_dlt,
    triangulate_pairs_midpoint,
)

CONFIDENCE_CLAMP = 1e-12


@dataclass(frozen=True)
class RansacConfig:
    """Thresholds for RANSAC triangulation (e_T in crop-space pixels)."""

    e_T: float = 8.0
    i_T: int = 2
    gamma: float = 1.0
    iterations: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.e_T <= 0.0:
            raise InvalidInput("e_T must be positive")
        if self.i_T < 2:
            raise InvalidInput("i_T must be at least 2")
        if self.gamma <= 0.0:
            raise InvalidInput("gamma must be positive")
        if self.iterations < 1:
            raise InvalidInput("iterations must be at least 1")


@dataclass(frozen=True, eq=False)
class Keypoint3D:
    """Triangulated keypoint with its consensus statistics."""

    position: np.ndarray
    inliers: int
    mean_reproj_error: float
    confidence: float
    keypoint_id: int
    hand: Hand
    inlier_indices: tuple[int, ...] = ()

    def __post_init__(self):
        pos = np.array(self.position, dtype=float).reshape(3)
        pos.setflags(write=False)
        object.__setattr__(self, "position", pos)


def keypoint_confidence(e_rep: float, i: int, cfg: RansacConfig) -> float:
    """Confidence C of a triangulated keypoint (see module docstring).

    Requires 0 <= e_rep < e_T and i >= i_T. Nondecreasing in i and
    strictly decreasing in e_rep; the exponent is flat between i_T and
    i_T + 1 because of the max(1, i - i_T) guard.
    """
    if not 0.0 <= e_rep < cfg.e_T:
        raise InvalidInput(f"e_rep {e_rep} outside [0, e_T={cfg.e_T})")
    if i < cfg.i_T:
        raise InvalidInput(f"inlier count {i} below i_T={cfg.i_T}")
    e_rep_score = (cfg.e_T - e_rep) / cfg.e_T
    c = e_rep_score ** (cfg.gamma / max(1, i - cfg.i_T))
    return float(np.clip(c, CONFIDENCE_CLAMP, 1.0 - CONFIDENCE_CLAMP))


def fuse_streams(
    fullframe: list[Detection2D], crop: list[Detection2D]
) -> dict[tuple[Hand, int], list[Detection2D]]:
    """Pool both detector streams per (hand, keypoint_id).

    Each detection stays an independent observation, so one camera may
    contribute two entries for the same keypoint (one per stream).
    """
    pools: dict[tuple[Hand, int], list[Detection2D]] = {}
    for det in list(fullframe) + list(crop):
        pools.setdefault((det.hand, det.keypoint_id), []).append(det)
    return pools


def _candidate_pairs(packed: PackedObservations) -> np.ndarray:
    """Index pairs from distinct cameras, in deterministic lexicographic order."""
    pairs = [
        (i, j)
        for i, j in combinations(range(len(packed)), 2)
        if packed.camera_ids[i] != packed.camera_ids[j]
    ]
    return np.array(pairs, dtype=int).reshape(-1, 2)


def ransac_triangulate(
    observations: list[Observation],
    cfg: RansacConfig,
    *,
    keypoint_id: int = 0,
    hand: Hand = Hand.LEFT,
) -> Keypoint3D:
    """Robustly triangulate one keypoint from its pooled observations.

    Hypotheses are two-view midpoint triangulations sampled uniformly over
    distinct-camera pairs (all pairs when there are at most `iterations`
    of them, which removes sampling randomness); the winner is re-solved
    by DLT over its full inlier set. Deterministic for a fixed seed.

    Raises InsufficientInliers when the best consensus is below i_T (the
    caller marks the keypoint Invalid and excludes it from IK).
    """
    packed = pack_observations(observations)
    if len({cid for cid in packed.camera_ids}) < 2:
        raise InsufficientInliers("observations from fewer than 2 distinct cameras")
    pairs = _candidate_pairs(packed)
    if pairs.shape[0] > cfg.iterations:
        rng = np.random.default_rng(cfg.seed)
        chosen = rng.choice(pairs.shape[0], size=cfg.iterations, replace=False)
        chosen.sort()
        pairs = pairs[chosen]
    points, valid = triangulate_pairs_midpoint(packed, pairs[:, 0], pairs[:, 1])
    if not valid.any():
        raise InsufficientInliers("all hypothesis pairs are degenerate")
    points = points[valid]
    errors = reprojection_errors(packed, points)  # (N, P)
    inlier_mask = errors < cfg.e_T
    counts = inlier_mask.sum(axis=0)
    with np.errstate(invalid="ignore"):
        mean_errs = np.where(
            counts > 0,
            np.sum(np.where(inlier_mask, errors, 0.0), axis=0) / np.maximum(counts, 1),
            np.inf,
        )
    best = int(np.lexsort((mean_errs, -counts))[0])
    best_count = int(counts[best])
    if best_count < cfg.i_T:
        raise InsufficientInliers(f"best consensus {best_count} below i_T={cfg.i_T}")
    inlier_idx = np.flatnonzero(inlier_mask[:, best])

    sub = pack_observations([observations[i] for i in inlier_idx])
    try:
        position = triangulate_dlt(sub)
    except DegenerateGeometry:
        # inliers collapsed onto a single ray; keep the hypothesis midpoint
        position = points[best]
    final_errors = reprojection_errors(sub, position.reshape(1, 3))[:, 0]
    e_rep = float(np.mean(final_errors))
    if not np.isfinite(e_rep) or e_rep >= cfg.e_T:
        raise InsufficientInliers("re-triangulated point violates the inlier threshold")
    return Keypoint3D(
        position=position,
        inliers=best_count,
        mean_reproj_error=e_rep,
        confidence=keypoint_confidence(e_rep, best_count, cfg),
        keypoint_id=keypoint_id,
        hand=hand,
        inlier_indices=tuple(int(i) for i in inlier_idx),
    )
