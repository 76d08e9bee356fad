"""Linear-blend-skinning hand model with a 21-joint keypoint convention.

Keypoint/joint order: 0 wrist, then per finger (thumb, index, middle,
ring, pinky) the chain base/PIP/DIP/TIP, i.e. keypoint 4*f + 1 + s for
finger f and segment s. Tip joints carry no rotation axes; finger bases
have two (abduction, flexion), mid joints one (flexion). The root joint
is driven by the pose's SE3 root, not by angles.

A model file is JSON:
    {"side", "scale", "rest_vertices": [[x,y,z]...], "faces": [[a,b,c]...],
     "joints": [{"parent", "t_rest": [3], "q_rest": [4],
                 "axes": [[3]...], "limits": [[lo,hi]...]}...],
     "skinning": [[vertex, joint, weight]...],
     "regressor": [[keypoint, vertex, weight]...]}

All derived tables needed by FK/IK (bind poses, sparse triplets,
keypoint influence pairs, per-DOF ownership and descendant masks) are
precomputed at construction; instances are immutable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import InputFormatError, InvalidInput
from ..fusion.detections import Hand
from ..jsonio import jsonable
from .. import jsonio

N_KEYPOINTS = 21
FINGERS = ("thumb", "index", "middle", "ring", "pinky")

_ROW_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class JointSpec:
    """One joint of the rooted tree: local rest transform + rotation axes."""

    parent: int
    t_rest: np.ndarray
    q_rest: np.ndarray
    axes: tuple[np.ndarray, ...]
    limits: tuple[tuple[float, float], ...]

    def __post_init__(self):
        t = np.array(self.t_rest, dtype=float).reshape(3)
        q = np.array(self.q_rest, dtype=float).reshape(4)
        if abs(np.linalg.norm(q) - 1.0) > 1e-9:
            raise InvalidInput("joint rest rotation must be a unit quaternion")
        axes = []
        for a in self.axes:
            a = np.array(a, dtype=float).reshape(3)
            n = np.linalg.norm(a)
            if abs(n - 1.0) > 1e-9:
                raise InvalidInput("joint axes must be unit vectors")
            a.setflags(write=False)
            axes.append(a)
        if len(axes) > 3:
            raise InvalidInput("a joint has at most 3 rotation axes")
        limits = tuple((float(lo), float(hi)) for lo, hi in self.limits)
        if len(limits) != len(axes):
            raise InvalidInput("one (lo, hi) limit pair per axis required")
        for lo, hi in limits:
            if not lo < hi:
                raise InvalidInput("joint limit lo must be < hi")
        t.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "t_rest", t)
        object.__setattr__(self, "q_rest", q)
        object.__setattr__(self, "axes", tuple(axes))
        object.__setattr__(self, "limits", limits)


@dataclass(frozen=True, eq=False)
class HandModel:
    rest_vertices: np.ndarray          # (V, 3) meters, unit scale
    faces: np.ndarray                  # (F, 3) vertex indices
    joints: tuple[JointSpec, ...]      # rooted tree, parents precede children
    skinning_weights: np.ndarray       # (V, J), rows sum to 1, nonnegative
    keypoint_regressor: np.ndarray     # (21, V), rows sum to 1
    scale: float = 1.0
    side: Hand = Hand.RIGHT

    def __post_init__(self):
        verts = np.array(self.rest_vertices, dtype=float).reshape(-1, 3)
        faces = np.array(self.faces, dtype=int).reshape(-1, 3)
        weights = np.array(self.skinning_weights, dtype=float)
        regressor = np.array(self.keypoint_regressor, dtype=float)
        n_v, n_j = verts.shape[0], len(self.joints)
        if self.scale <= 0.0:
            raise InvalidInput("scale must be positive")
        if weights.shape != (n_v, n_j):
            raise InvalidInput("skinning_weights must be (V, J)")
        if regressor.shape != (N_KEYPOINTS, n_v):
            raise InvalidInput(f"keypoint_regressor must be ({N_KEYPOINTS}, V)")
        if np.any(weights < -_ROW_TOL):
            raise InvalidInput("skinning weights must be nonnegative")
        if np.any(np.abs(weights.sum(axis=1) - 1.0) > _ROW_TOL):
            raise InvalidInput("skinning weight rows must sum to 1")
        if np.any(np.abs(regressor.sum(axis=1) - 1.0) > _ROW_TOL):
            raise InvalidInput("regressor rows must sum to 1")
        if faces.size and (faces.min() < 0 or faces.max() >= n_v):
            raise InvalidInput("face indices out of range")
        if self.joints[0].parent != -1:
            raise InvalidInput("joint 0 must be the root (parent == -1)")
        if self.joints[0].axes:
            raise InvalidInput("the root joint is driven by the pose root, not by angles")
        for j, spec in enumerate(self.joints[1:], start=1):
            if not 0 <= spec.parent < j:
                raise InvalidInput("parents must precede children (single-root tree)")
        for arr in (verts, faces, weights, regressor):
            arr.setflags(write=False)
        object.__setattr__(self, "rest_vertices", verts)
        object.__setattr__(self, "faces", faces)
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "skinning_weights", weights)
        object.__setattr__(self, "keypoint_regressor", regressor)
        self._precompute()

    # -- derived tables ---------------------------------------------------

    def _precompute(self) -> None:
        joints = self.joints
        n_j = len(joints)
        s = self.scale
        parents = np.array([j.parent for j in joints], dtype=int)

        # global rest pose (rotation + scaled translation) per joint
        from ..geometry.se3 import quat_to_matrix

        rest_rot = np.empty((n_j, 3, 3))
        rest_pos = np.empty((n_j, 3))
        local_rest_rot = np.empty((n_j, 3, 3))
        for j, spec in enumerate(joints):
            local_rest_rot[j] = quat_to_matrix(spec.q_rest)
            if spec.parent < 0:
                rest_rot[j] = local_rest_rot[j]
                rest_pos[j] = s * spec.t_rest
            else:
                p = spec.parent
                rest_rot[j] = rest_rot[p] @ local_rest_rot[j]
                rest_pos[j] = rest_pos[p] + rest_rot[p] @ (s * spec.t_rest)

        # flat DOF table
        dof_joint, dof_axis_index, limits = [], [], []
        for j, spec in enumerate(joints):
            for a, lim in zip(range(len(spec.axes)), spec.limits):
                dof_joint.append(j)
                dof_axis_index.append(a)
                limits.append(lim)
        dof_joint_arr = np.array(dof_joint, dtype=int)

        # descendant-or-self mask per DOF owner
        desc = np.zeros((len(dof_joint), n_j), dtype=bool)
        ancestors: list[set[int]] = []
        for j in range(n_j):
            chain = {j}
            p = int(parents[j])
            while p >= 0:
                chain.add(p)
                p = int(parents[p])
            ancestors.append(chain)
        for d, owner in enumerate(dof_joint):
            for j in range(n_j):
                desc[d, j] = owner in ancestors[j]

        # sparse skinning triplets with bind-local vertex coordinates
        vi, ji = np.nonzero(self.skinning_weights)
        wi = self.skinning_weights[vi, ji]
        scaled = s * self.rest_vertices
        skin_local = np.einsum("pba,pb->pa", rest_rot[ji], scaled[vi] - rest_pos[ji])

        # keypoint influence pairs: kp_k = sum_j G_j B_j^-1 m_kj
        mass = self.keypoint_regressor @ self.skinning_weights  # (21, J)
        moment = np.einsum("kv,vj,va->kja", self.keypoint_regressor, self.skinning_weights, scaled)
        pk, pj = np.nonzero(mass > 1e-15)
        pair_mass = mass[pk, pj]
        pair_local = np.einsum(
            "pba,pb->pa", rest_rot[pj], moment[pk, pj] - pair_mass[:, None] * rest_pos[pj]
        )

        tables = {
            "parents": parents,
            "rest_rot": rest_rot,
            "rest_pos": rest_pos,
            "local_rest_rot": local_rest_rot,
            "scaled_local_offsets": np.stack([s * j.t_rest for j in joints]),
            "dof_joint": dof_joint_arr,
            "dof_axis_index": np.array(dof_axis_index, dtype=int),
            "angle_limits": np.array(limits, dtype=float).reshape(-1, 2),
            "desc": desc,
            "skin_vi": vi,
            "skin_ji": ji,
            "skin_wi": wi,
            "skin_local": skin_local,
            "pair_k": pk,
            "pair_j": pj,
            "pair_mass": pair_mass,
            "pair_local": pair_local,
        }
        for arr in tables.values():
            arr.setflags(write=False)
        object.__setattr__(self, "_tables", tables)

    @property
    def n_vertices(self) -> int:
        return self.rest_vertices.shape[0]

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @property
    def n_angles(self) -> int:
        return int(self._tables["dof_joint"].shape[0])

    @property
    def angle_limits(self) -> np.ndarray:
        """(n_angles, 2) lo/hi bounds in DOF order."""
        return self._tables["angle_limits"]

    @property
    def rest_joint_positions(self) -> np.ndarray:
        return self._tables["rest_pos"]


# -- file format -----------------------------------------------------------


def parse_hand_model(data: dict, *, source: str = "hand_model") -> HandModel:
    try:
        joints = tuple(
            JointSpec(
                parent=int(j["parent"]),
                t_rest=j["t_rest"],
                q_rest=j.get("q_rest", (1.0, 0.0, 0.0, 0.0)),
                axes=tuple(np.asarray(a, dtype=float) for a in j.get("axes", ())),
                limits=tuple((float(lo), float(hi)) for lo, hi in j.get("limits", ())),
            )
            for j in data["joints"]
        )
        n_v = len(data["rest_vertices"])
        weights = np.zeros((n_v, len(joints)))
        for v, j, w in data["skinning"]:
            weights[int(v), int(j)] += float(w)
        regressor = np.zeros((N_KEYPOINTS, n_v))
        for k, v, w in data["regressor"]:
            regressor[int(k), int(v)] += float(w)
        return HandModel(
            rest_vertices=np.asarray(data["rest_vertices"], dtype=float),
            faces=np.asarray(data["faces"], dtype=int).reshape(-1, 3),
            joints=joints,
            skinning_weights=weights,
            keypoint_regressor=regressor,
            scale=float(data.get("scale", 1.0)),
            side=Hand(data.get("side", "right")),
        )
    except (KeyError, TypeError, ValueError, InvalidInput) as exc:
        raise InputFormatError(f"bad hand model ({exc})", source=source) from exc


def hand_model_to_dict(model: HandModel) -> dict:
    vi, ji = np.nonzero(model.skinning_weights)
    ki, kv = np.nonzero(model.keypoint_regressor)
    return {
        "side": model.side.value,
        "scale": model.scale,
        "rest_vertices": jsonable(model.rest_vertices),
        "faces": jsonable(model.faces),
        "joints": [
            {
                "parent": spec.parent,
                "t_rest": jsonable(spec.t_rest),
                "q_rest": jsonable(spec.q_rest),
                "axes": [jsonable(a) for a in spec.axes],
                "limits": [list(l) for l in spec.limits],
            }
            for spec in model.joints
        ],
        "skinning": [
            [int(v), int(j), float(model.skinning_weights[v, j])] for v, j in zip(vi, ji)
        ],
        "regressor": [
            [int(k), int(v), float(model.keypoint_regressor[k, v])] for k, v in zip(ki, kv)
        ],
    }


def load_hand_model(path: str | Path) -> HandModel:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"malformed JSON ({exc.msg})", source=str(path), line=exc.lineno) from exc
    return parse_hand_model(data, source=str(path))


def save_hand_model(model: HandModel, path: str | Path) -> None:
    Path(path).write_text(jsonio.dumps_canonical(hand_model_to_dict(model)) + "\n")


# -- default procedural hand -------------------------------------------------

_FINGER_X = {"index": -0.027, "middle": -0.009, "ring": 0.009, "pinky": 0.027}
_FINGER_LENGTHS = {
    "index": (0.040, 0.025, 0.020),
    "middle": (0.045, 0.028, 0.022),
    "ring": (0.040, 0.026, 0.020),
    "pinky": (0.032, 0.020, 0.018),
}
_THUMB_LENGTHS = (0.045, 0.032, 0.025)
_MCP_Y = 0.090
_FLEX_LIMITS = (-0.35, 1.75)
_ABDUCT_LIMITS = (-0.45, 0.45)
_THUMB_FLEX_LIMITS = (-0.60, 1.60)
_THUMB_ABDUCT_LIMITS = (-0.80, 0.60)
_FINGER_RADIUS = 0.008
_RING_SIDES = 6


def default_hand_model(side: Hand = Hand.RIGHT, scale: float = 1.0) -> HandModel:
    """Procedural test hand: cylinder fingers, 21 joints, marker keypoints.

    Geometry (right hand): wrist at the origin, fingers along +y, palm
    facing -z, thumb on the -x side. The left hand mirrors x; rotation
    axes are mirrored so equal angle values produce mirrored motions.
    The mesh is deliberately simple; pipeline correctness does not depend
    on mesh fidelity.
    """
    mirror = -1.0 if side == Hand.LEFT else 1.0
    joints: list[JointSpec] = [
        JointSpec(parent=-1, t_rest=np.zeros(3), q_rest=(1, 0, 0, 0), axes=(), limits=())
    ]
    flex_axis = np.array([-1.0, 0.0, 0.0])
    abduct_axis = np.array([0.0, 0.0, 1.0])
    thumb_dir = np.array([-np.sqrt(0.5), np.sqrt(0.5), 0.0])
    thumb_flex = np.cross(np.array([0.0, 0.0, 1.0]), thumb_dir)

    def _mirrored(axis: np.ndarray) -> np.ndarray:
        if mirror > 0:
            return axis
        # reflect through the x=0 plane and flip sign to keep motion mirrored
        return -axis * np.array([-1.0, 1.0, 1.0])

    chains: dict[str, list[int]] = {}
    for finger in FINGERS:
        if finger == "thumb":
            base_offset = np.array([mirror * -0.030, 0.025, -0.005])
            direction = thumb_dir * np.array([mirror, 1.0, 1.0])
            lengths = _THUMB_LENGTHS
            flex = _mirrored(thumb_flex)
            abduct = _mirrored(abduct_axis)
            base_axes = (abduct, flex)
            base_limits = (_THUMB_ABDUCT_LIMITS, _THUMB_FLEX_LIMITS)
            mid_limits = _THUMB_FLEX_LIMITS
        else:
            base_offset = np.array([mirror * _FINGER_X[finger], _MCP_Y, 0.0])
            direction = np.array([0.0, 1.0, 0.0])
            lengths = _FINGER_LENGTHS[finger]
            flex = _mirrored(flex_axis)
            abduct = _mirrored(abduct_axis)
            base_axes = (abduct, flex)
            base_limits = (_ABDUCT_LIMITS, _FLEX_LIMITS)
            mid_limits = _FLEX_LIMITS
        chain = []
        parent = 0
        offset = base_offset
        for seg, length in enumerate(lengths):
            if seg == 0:
                axes, limits = base_axes, base_limits
            else:
                axes, limits = (flex,), (mid_limits,)
            joints.append(
                JointSpec(parent=parent, t_rest=offset, q_rest=(1, 0, 0, 0), axes=axes, limits=limits)
            )
            chain.append(len(joints) - 1)
            parent = len(joints) - 1
            offset = direction * length
        # tip: no rotation axes
        joints.append(JointSpec(parent=parent, t_rest=offset, q_rest=(1, 0, 0, 0), axes=(), limits=()))
        chain.append(len(joints) - 1)
        chains[finger] = chain

    # joint order built above is wrist, thumb chain, index chain, ...; that
    # matches the 21-keypoint convention directly.
    n_j = len(joints)
    assert n_j == N_KEYPOINTS

    rest_pos = np.zeros((n_j, 3))
    for j, spec in enumerate(joints):
        rest_pos[j] = spec.t_rest if spec.parent < 0 else rest_pos[spec.parent] + spec.t_rest

    vertices: list[np.ndarray] = []
    weights: list[tuple[int, int, float]] = []
    faces: list[tuple[int, int, int]] = []

    # marker vertices: one per joint, pinned to it; the regressor selects them
    for j in range(n_j):
        vertices.append(rest_pos[j])
        weights.append((j, j, 1.0))

    def _ring(center, axis_dir, radius):
        axis_dir = axis_dir / np.linalg.norm(axis_dir)
        ref = np.array([0.0, 0.0, 1.0])
        if abs(axis_dir @ ref) > 0.9:
            ref = np.array([1.0, 0.0, 0.0])
        u = np.cross(axis_dir, ref)
        u /= np.linalg.norm(u)
        v = np.cross(axis_dir, u)
        return [
            center + radius * (np.cos(a) * u + np.sin(a) * v)
            for a in np.linspace(0.0, 2.0 * np.pi, _RING_SIDES, endpoint=False)
        ]

    def _band(first_ring: int, second_ring: int):
        for i in range(_RING_SIDES):
            a, b = first_ring + i, first_ring + (i + 1) % _RING_SIDES
            c, d = second_ring + i, second_ring + (i + 1) % _RING_SIDES
            faces.append((a, b, c))
            faces.append((b, d, c))

    for finger, chain in chains.items():
        radius = _FINGER_RADIUS * (1.25 if finger == "thumb" else 1.0)
        for seg in range(3):
            j = chain[seg]
            start, end = rest_pos[j], rest_pos[chain[seg + 1]]
            axis_dir = end - start
            ring_starts = []
            for frac, blend in ((0.12, None), (0.5, None), (0.88, None)):
                ring_starts.append(len(vertices))
                for p in _ring(start + frac * axis_dir, axis_dir, radius):
                    vertices.append(p)
                    weights.append((len(vertices) - 1, j, 1.0))
            _band(ring_starts[0], ring_starts[1])
            _band(ring_starts[1], ring_starts[2])
            if seg < 2:
                # blend ring at the next joint, shared between segments
                blend_start = len(vertices)
                for p in _ring(end, axis_dir, radius):
                    vertices.append(p)
                    weights.append((len(vertices) - 1, j, 0.5))
                    weights.append((len(vertices) - 1, chain[seg + 1], 0.5))
                _band(ring_starts[2], blend_start)
            else:
                # cap the fingertip with the tip marker vertex
                tip_marker = chain[3]
                for i in range(_RING_SIDES):
                    a = ring_starts[2] + i
                    b = ring_starts[2] + (i + 1) % _RING_SIDES
                    faces.append((a, b, tip_marker))

    # palm: a thin box from the wrist to the knuckle line, pinned to the wrist
    palm_half_w = 0.040
    palm = [
        np.array([mirror * x, y, z])
        for x in (-palm_half_w, palm_half_w)
        for y in (0.005, _MCP_Y - 0.005)
        for z in (-0.012, 0.012)
    ]
    palm_start = len(vertices)
    for p in palm:
        vertices.append(p)
        weights.append((len(vertices) - 1, 0, 1.0))
    for quad in (
        (0, 1, 3, 2), (4, 6, 7, 5), (0, 4, 5, 1), (2, 3, 7, 6), (0, 2, 6, 4), (1, 5, 7, 3)
    ):
        a, b, c, d = (palm_start + i for i in quad)
        faces.append((a, b, c))
        faces.append((a, c, d))

    n_v = len(vertices)
    weight_matrix = np.zeros((n_v, n_j))
    for v, j, w in weights:
        weight_matrix[v, j] += w
    regressor = np.zeros((N_KEYPOINTS, n_v))
    for k in range(N_KEYPOINTS):
        regressor[k, k] = 1.0

    face_arr = np.array(faces, dtype=int)
    if side == Hand.LEFT:
        face_arr = face_arr[:, ::-1]  # keep outward winding under the mirror

    return HandModel(
        rest_vertices=np.array(vertices),
        faces=face_arr,
        joints=tuple(joints),
        skinning_weights=weight_matrix,
        keypoint_regressor=regressor,
        scale=scale,
        side=side,
    )
