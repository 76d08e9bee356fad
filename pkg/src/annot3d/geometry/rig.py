"""Calibrated multi-camera rig: camera list with extrinsics in one rig frame.

The rig frame doubles as the world frame for all downstream 3D outputs
(it moves with the wearer, not the physical world). Extrinsics are stored
as rig-from-camera transforms: X_rig = pose.apply(X_cam).

Calibration file schema (JSON):
    {"cameras": [{"id", "model": "fisheye-eq4", "fx", "fy", "cx", "cy",
                  "k": [4], "width", "height",
                  "q_rig_cam": [w,x,y,z], "t_rig_cam": [3], "ego": bool}]}
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..errors import InputFormatError, InvalidInput
from ..jsonio import jsonable
from .cameras import FisheyeIntrinsics
from .se3 import SE3Pose

CALIBRATION_MODEL = "fisheye-eq4"


@dataclass(frozen=True, eq=False)
class RigCamera:
    id: str
    intrinsics: FisheyeIntrinsics
    rig_from_cam: SE3Pose


@dataclass(frozen=True, eq=False)
class CameraRig:
    cameras: tuple[RigCamera, ...]
    ego_ids: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "cameras", tuple(self.cameras))
        object.__setattr__(self, "ego_ids", frozenset(self.ego_ids))
        ids = [c.id for c in self.cameras]
        if len(set(ids)) != len(ids):
            raise InvalidInput("camera ids must be unique")
        if len(ids) < 2:
            raise InvalidInput("a rig needs at least 2 cameras for triangulation")
        unknown = self.ego_ids - set(ids)
        if unknown:
            raise InvalidInput(f"ego ids not present in camera list: {sorted(unknown)}")

    @property
    def camera_ids(self) -> tuple[str, ...]:
        return tuple(c.id for c in self.cameras)

    def camera(self, camera_id: str) -> RigCamera:
        for cam in self.cameras:
            if cam.id == camera_id:
                return cam
        raise InvalidInput(f"unknown camera id {camera_id!r}")


def parse_calibration(data: dict, *, source: str = "calibration") -> CameraRig:
    """Build a CameraRig from the calibration JSON object."""
    if not isinstance(data, dict) or "cameras" not in data:
        raise InputFormatError("expected an object with a 'cameras' list", source=source)
    cameras = []
    ego_ids = set()
    for i, entry in enumerate(data["cameras"]):
        try:
            if entry.get("model", CALIBRATION_MODEL) != CALIBRATION_MODEL:
                raise InvalidInput(f"unsupported camera model {entry.get('model')!r}")
            intr = FisheyeIntrinsics(
                fx=float(entry["fx"]),
                fy=float(entry["fy"]),
                cx=float(entry["cx"]),
                cy=float(entry["cy"]),
                k=tuple(entry["k"]),
                width=int(entry["width"]),
                height=int(entry["height"]),
                max_angle_deg=float(entry.get("max_angle_deg", 100.0)),
            )
            pose = SE3Pose(entry["q_rig_cam"], entry["t_rig_cam"])
            cameras.append(RigCamera(id=str(entry["id"]), intrinsics=intr, rig_from_cam=pose))
            if entry.get("ego", False):
                ego_ids.add(str(entry["id"]))
        except (KeyError, TypeError, ValueError, InvalidInput) as exc:
            raise InputFormatError(f"camera entry {i}: {exc}", source=source) from exc
    return CameraRig(cameras=tuple(cameras), ego_ids=frozenset(ego_ids))


def rig_to_dict(rig: CameraRig) -> dict:
    return {
        "cameras": [
            {
                "id": cam.id,
                "model": CALIBRATION_MODEL,
                "fx": cam.intrinsics.fx,
                "fy": cam.intrinsics.fy,
                "cx": cam.intrinsics.cx,
                "cy": cam.intrinsics.cy,
                "k": list(cam.intrinsics.k),
                "width": cam.intrinsics.width,
                "height": cam.intrinsics.height,
                "max_angle_deg": cam.intrinsics.max_angle_deg,
                "q_rig_cam": jsonable(cam.rig_from_cam.q),
                "t_rig_cam": jsonable(cam.rig_from_cam.t),
                "ego": cam.id in rig.ego_ids,
            }
            for cam in rig.cameras
        ]
    }


def load_calibration(path: str | Path) -> CameraRig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"malformed JSON ({exc.msg})", source=str(path), line=exc.lineno) from exc
    return parse_calibration(data, source=str(path))


def save_calibration(rig: CameraRig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(rig_to_dict(rig), sort_keys=True, indent=2) + "\n")
