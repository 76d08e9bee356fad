"""Object CAD models and 2D-3D correspondences.

The neural detection/feature stages are out of scope; correspondences
arrive as files (or from the synthetic oracle) and stand in for their
feature matches:

    {"frame", "object", "corr": [{"cam", "lm", "px": [u, v], "w"}]}

with "px" in the source camera's fisheye pixel space and "lm" an index
into the model's landmark list. Object models load from an OBJ subset
(v/f lines only) plus a JSON list of landmark vertex indices.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
import json

import numpy as np

from ..errors import EmptyMesh, InputFormatError, InvalidInput
from ..jsonio import dumps_jsonl, iter_jsonl, require_keys


@dataclass(frozen=True, eq=False)
class ObjectModel:
    id: str
    vertices: np.ndarray          # (V, 3) meters, object frame
    faces: np.ndarray             # (F, 3)
    landmark_indices: np.ndarray  # (L,) indices into vertices

    def __post_init__(self):
        verts = np.array(self.vertices, dtype=float).reshape(-1, 3)
        faces = np.array(self.faces, dtype=int).reshape(-1, 3)
        lm = np.array(self.landmark_indices, dtype=int).reshape(-1)
        if verts.shape[0] == 0:
            raise EmptyMesh("object model has no vertices")
        if lm.size and (lm.min() < 0 or lm.max() >= verts.shape[0]):
            raise InvalidInput("landmark indices out of range")
        if faces.size and (faces.min() < 0 or faces.max() >= verts.shape[0]):
            raise InvalidInput("face indices out of range")
        for arr in (verts, faces, lm):
            arr.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "faces", faces)
        object.__setattr__(self, "landmark_indices", lm)

    @property
    def landmark_points(self) -> np.ndarray:
        return self.vertices[self.landmark_indices]


@dataclass(frozen=True, eq=False)
class Correspondence:
    camera_id: str
    landmark_index: int
    pixel: np.ndarray  # fisheye pixels
    weight: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.weight <= 1.0:
            raise InvalidInput("correspondence weight must be in (0, 1]")
        if self.landmark_index < 0:
            raise InvalidInput("landmark index must be nonnegative")
        px = np.array(self.pixel, dtype=float).reshape(2)
        px.setflags(write=False)
        object.__setattr__(self, "pixel", px)


def parse_obj(text: str, *, object_id: str = "object", landmark_indices=None, source: str = "obj") -> ObjectModel:
    """Parse the v/f subset of Wavefront OBJ (1-based indices, optional v/vt/vn slashes)."""
    vertices, faces = [], []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        parts = raw.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] == "v":
            if len(parts) < 4:
                raise InputFormatError("vertex line needs 3 coordinates", source=source, line=line_no)
            vertices.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            if len(parts) != 4:
                raise InputFormatError("only triangle faces are supported", source=source, line=line_no)
            try:
                faces.append([int(p.split("/")[0]) - 1 for p in parts[1:4]])
            except ValueError as exc:
                raise InputFormatError(f"bad face index ({exc})", source=source, line=line_no) from exc
        # other OBJ statements are ignored
    if not vertices:
        raise InputFormatError("no vertices found", source=source)
    if landmark_indices is None:
        landmark_indices = np.arange(len(vertices))
    return ObjectModel(
        id=object_id,
        vertices=np.asarray(vertices, dtype=float),
        faces=np.asarray(faces, dtype=int).reshape(-1, 3),
        landmark_indices=np.asarray(landmark_indices, dtype=int),
    )


def format_obj(model: ObjectModel) -> str:
    lines = [f"v {x} {y} {z}" for x, y, z in model.vertices.tolist()]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in model.faces.tolist()]
    return "\n".join(lines) + "\n"


def load_object_model(obj_path: str | Path, landmarks_path: str | Path | None = None, *, object_id: str | None = None) -> ObjectModel:
    obj_path = Path(obj_path)
    landmark_indices = None
    if landmarks_path is not None:
        try:
            landmark_indices = json.loads(Path(landmarks_path).read_text())
        except json.JSONDecodeError as exc:
            raise InputFormatError(f"malformed JSON ({exc.msg})", source=str(landmarks_path), line=exc.lineno) from exc
    return parse_obj(
        obj_path.read_text(),
        object_id=object_id or obj_path.stem,
        landmark_indices=landmark_indices,
        source=str(obj_path),
    )


def parse_correspondences_jsonl(text: str, *, source: str = "correspondences") -> dict[int, dict[str, list[Correspondence]]]:
    """frame -> object id -> correspondence list."""
    frames: dict[int, dict[str, list[Correspondence]]] = {}
    for line_no, record in iter_jsonl(text, source=source):
        require_keys(record, ("frame", "object", "corr"), source=source, line=line_no)
        try:
            frame = int(record["frame"])
            obj = str(record["object"])
            corr = [
                Correspondence(
                    camera_id=str(c["cam"]),
                    landmark_index=int(c["lm"]),
                    pixel=c["px"],
                    weight=float(c.get("w", 1.0)),
                )
                for c in record["corr"]
            ]
        except (KeyError, TypeError, ValueError, InvalidInput) as exc:
            raise InputFormatError(f"bad correspondence record ({exc})", source=source, line=line_no) from exc
        frames.setdefault(frame, {}).setdefault(obj, []).extend(corr)
    return frames


def format_correspondences_jsonl(frames: dict[int, dict[str, list[Correspondence]]]) -> str:
    records = []
    for frame in sorted(frames):
        for obj in sorted(frames[frame]):
            records.append(
                {
                    "frame": frame,
                    "object": obj,
                    "corr": [
                        {
                            "cam": c.camera_id,
                            "lm": c.landmark_index,
                            "px": [float(c.pixel[0]), float(c.pixel[1])],
                            "w": c.weight,
                        }
                        for c in frames[frame][obj]
                    ],
                }
            )
    return dumps_jsonl(records)
