"""Interaction fields: per-vertex closest-vertex distances between meshes.

The field from mesh a to mesh b assigns every vertex of a the Euclidean
distance to the closest vertex of b (vertex-to-vertex by definition, not
point-to-surface). All four hand/object fields (l->o, r->o, o->l, o->r)
come from four calls with swapped arguments.

Queries run against a point BVH (median split on the widest axis, leaf
size 8) with branch-and-bound pruning on squared distances, so results
are exact: both the index path and the brute-force oracle take the same
sqrt of the same minimal squared distance, which keeps them bit-equal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyMesh, InvalidInput, LengthMismatch

LEAF_SIZE = 8
DEFAULT_CONTACT_THRESHOLD_M = 0.005


@dataclass(frozen=True, eq=False)
class InteractionField:
    source: str
    target: str
    distances: np.ndarray  # (V_source,) meters

    def __post_init__(self):
        d = np.array(self.distances, dtype=float).reshape(-1)
        if np.any(d < 0.0):
            raise InvalidInput("field distances must be nonnegative")
        d.setflags(write=False)
        object.__setattr__(self, "distances", d)


@dataclass(frozen=True, eq=False)
class ContactMap:
    threshold: float
    in_contact: np.ndarray  # (V_source,) bool

    def __post_init__(self):
        m = np.array(self.in_contact, dtype=bool).reshape(-1)
        m.setflags(write=False)
        object.__setattr__(self, "in_contact", m)


@dataclass(frozen=True)
class _Node:
    lo: np.ndarray
    hi: np.ndarray
    left: "_Node | None"
    right: "_Node | None"
    indices: np.ndarray | None  # leaf payload


class SpatialIndex:
    """Point BVH over a target vertex set; exact nearest-neighbor queries."""

    def __init__(self, points: np.ndarray):
        pts = np.ascontiguousarray(points, dtype=float).reshape(-1, 3)
        if pts.shape[0] == 0:
            raise EmptyMesh("cannot index an empty vertex set")
        self.points = pts
        self._root = self._build(np.arange(pts.shape[0]))

    def _build(self, indices: np.ndarray) -> _Node:
        pts = self.points[indices]
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        if indices.size <= LEAF_SIZE:
            return _Node(lo=lo, hi=hi, left=None, right=None, indices=indices)
        axis = int(np.argmax(hi - lo))
        order = np.argsort(pts[:, axis], kind="stable")
        half = indices.size // 2
        return _Node(
            lo=lo,
            hi=hi,
            left=self._build(indices[order[:half]]),
            right=self._build(indices[order[half:]]),
            indices=None,
        )

    @staticmethod
    def _box_sq_dist(node: _Node, q: np.ndarray) -> float:
        d = np.maximum(node.lo - q, 0.0) + np.maximum(q - node.hi, 0.0)
        return float(d @ d)

    def nearest_sq(self, query: np.ndarray) -> float:
        """Exact squared distance from `query` to the nearest indexed point."""
        q = np.asarray(query, dtype=float).reshape(3)
        best = np.inf
        stack = [self._root]
        while stack:
            node = stack.pop()
            if self._box_sq_dist(node, q) > best:
                continue
            if node.indices is not None:
                diff = self.points[node.indices] - q
                d = np.einsum("ij,ij->i", diff, diff)
                local = float(d.min())
                if local < best:
                    best = local
                continue
            # visit the nearer child first for tighter early bounds
            dl = self._box_sq_dist(node.left, q)
            dr = self._box_sq_dist(node.right, q)
            if dl <= dr:
                stack.append(node.right)
                stack.append(node.left)
            else:
                stack.append(node.left)
                stack.append(node.right)
        return best

    def nearest_sq_many(self, queries: np.ndarray) -> np.ndarray:
        """Exact squared nearest distances for (N, 3) queries.

        Simultaneous descent: each node is visited once for the subset of
        queries it can still improve (box bound not above the current
        best), which keeps the pruning exact while amortizing traversal
        across queries.
        """
        pts = np.asarray(queries, dtype=float).reshape(-1, 3)
        best = np.full(pts.shape[0], np.inf)
        stack = [(self._root, np.arange(pts.shape[0]))]
        while stack:
            node, active = stack.pop()
            d = np.maximum(node.lo - pts[active], 0.0) + np.maximum(pts[active] - node.hi, 0.0)
            box = np.einsum("ij,ij->i", d, d)
            keep = active[box <= best[active]]
            if keep.size == 0:
                continue
            if node.indices is not None:
                diff = pts[keep][:, None, :] - self.points[node.indices][None, :, :]
                sq = np.einsum("qij,qij->qi", diff, diff)
                np.minimum.at(best, keep, sq.min(axis=1))
                continue
            stack.append((node.right, keep))
            stack.append((node.left, keep))
        return best


def interaction_field(
    source_vertices: np.ndarray,
    index: SpatialIndex,
    *,
    source: str = "a",
    target: str = "b",
) -> InteractionField:
    """Distance from every source vertex to its closest target vertex."""
    src = np.asarray(source_vertices, dtype=float).reshape(-1, 3)
    if src.shape[0] == 0:
        raise EmptyMesh("interaction field needs a nonempty source mesh")
    sq = index.nearest_sq_many(src)
    return InteractionField(source=source, target=target, distances=np.sqrt(sq))


def brute_force_field(
    source_vertices: np.ndarray,
    target_vertices: np.ndarray,
    *,
    source: str = "a",
    target: str = "b",
) -> InteractionField:
    """O(V_a * V_b) oracle: same min-of-squared-distances, then one sqrt."""
    src = np.asarray(source_vertices, dtype=float).reshape(-1, 3)
    tgt = np.asarray(target_vertices, dtype=float).reshape(-1, 3)
    if src.shape[0] == 0 or tgt.shape[0] == 0:
        raise EmptyMesh("brute-force field needs nonempty meshes")
    diff = src[:, None, :] - tgt[None, :, :]
    sq = np.einsum("stk,stk->st", diff, diff)
    return InteractionField(source=source, target=target, distances=np.sqrt(sq.min(axis=1)))


def contact_map(field: InteractionField, threshold: float = DEFAULT_CONTACT_THRESHOLD_M) -> ContactMap:
    """Vertices strictly closer than `threshold` are in contact."""
    if threshold <= 0.0:
        raise InvalidInput("contact threshold must be positive")
    return ContactMap(threshold=threshold, in_contact=field.distances < threshold)


def field_ade(predicted: InteractionField, ground_truth: InteractionField) -> float:
    """Average distance error in millimeters."""
    if predicted.distances.shape != ground_truth.distances.shape:
        raise LengthMismatch("predicted and ground-truth fields differ in length")
    return float(np.mean(np.abs(predicted.distances - ground_truth.distances)) * 1000.0)


def field_acc(fields: list[InteractionField], frame_rate_hz: float) -> float:
    """Temporal smoothness: mean |second difference| * rate^2, in m/s^2."""
    if len(fields) < 3:
        raise LengthMismatch("acceleration needs at least 3 frames")
    sizes = {f.distances.shape for f in fields}
    if len(sizes) != 1:
        raise LengthMismatch("all frames must share the field length")
    if frame_rate_hz <= 0.0:
        raise InvalidInput("frame rate must be positive")
    arr = np.stack([f.distances for f in fields])
    second = arr[:-2] - 2.0 * arr[1:-1] + arr[2:]
    return float(np.mean(np.abs(second)) * frame_rate_hz**2)
