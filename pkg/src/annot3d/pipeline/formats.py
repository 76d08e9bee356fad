"""Record schemas for pipeline artifacts (all JSONL, deterministic bytes).

    hand_keypoints: {"frame","hand","kp","xyz":[3],"inliers","e_rep","conf"}
    hand_poses:     {"frame","hand","root_q":[4],"root_t":[3],"angles":[...],
                     "residual","conf"}
    object_poses:   {"frame","object","q":[4],"t":[3],"conf","mode"}
                    (q/t/conf null while LOST)
    fields:         {"frame","object","pair":"l->o","d":[...]}
    contacts:       {"frame","object","pair","threshold","contact":[bool...]}
    gt sidecar:     {"frame","category",
                     "hands":{side:{"kp":[[3]x21],"root_q","root_t","angles"}},
                     "objects":{id:{"q":[4],"t":[3]}}}
"""

from __future__ import annotations

import numpy as np

from ..errors import InputFormatError
from ..evalreport.report import GroundTruthFrame, HandPrediction, ObjectPrediction
from ..fusion.detections import Hand
from ..geometry.se3 import SE3Pose
from ..hand.ik import HandPose
from ..jsonio import dumps_jsonl, iter_jsonl, jsonable, require_keys


def format_hand_keypoints(records: list[dict]) -> str:
    ordered = sorted(records, key=lambda r: (r["frame"], r["hand"], r["kp"]))
    return dumps_jsonl(jsonable(r) for r in ordered)


def format_hand_poses(records: list[dict]) -> str:
    ordered = sorted(records, key=lambda r: (r["frame"], r["hand"]))
    return dumps_jsonl(jsonable(r) for r in ordered)


def parse_hand_poses(text: str, *, source: str = "hand_poses") -> dict[tuple[int, str], dict]:
    out: dict[tuple[int, str], dict] = {}
    for line_no, rec in iter_jsonl(text, source=source):
        require_keys(rec, ("frame", "hand", "root_q", "root_t", "angles"), source=source, line=line_no)
        try:
            key = (int(rec["frame"]), str(rec["hand"]))
            out[key] = {
                "root_q": np.asarray(rec["root_q"], dtype=float),
                "root_t": np.asarray(rec["root_t"], dtype=float),
                "angles": np.asarray(rec["angles"], dtype=float),
                "residual": float(rec.get("residual", 0.0)),
                "conf": float(rec.get("conf", 0.0)),
            }
        except (TypeError, ValueError) as exc:
            raise InputFormatError(f"bad hand pose record ({exc})", source=source, line=line_no) from exc
    return out


def hand_pose_from_record(record: dict, side: str) -> HandPose:
    return HandPose(
        root=SE3Pose(record["root_q"], record["root_t"]),
        joint_angles=record["angles"],
        hand=Hand(side),
    )


def format_object_poses(records: list[dict]) -> str:
    ordered = sorted(records, key=lambda r: (r["frame"], r["object"]))
    return dumps_jsonl(jsonable(r) for r in ordered)


def parse_object_poses(text: str, *, source: str = "object_poses") -> dict[tuple[int, str], dict]:
    out: dict[tuple[int, str], dict] = {}
    for line_no, rec in iter_jsonl(text, source=source):
        require_keys(rec, ("frame", "object", "mode"), source=source, line=line_no)
        try:
            key = (int(rec["frame"]), str(rec["object"]))
            pose = None
            if rec.get("q") is not None and rec.get("t") is not None:
                pose = SE3Pose.from_qt(rec["q"], rec["t"])
            out[key] = {
                "pose": pose,
                "conf": None if rec.get("conf") is None else float(rec["conf"]),
                "mode": str(rec["mode"]),
            }
        except (TypeError, ValueError) as exc:
            raise InputFormatError(f"bad object pose record ({exc})", source=source, line=line_no) from exc
    return out


def format_fields(records: list[dict]) -> str:
    ordered = sorted(records, key=lambda r: (r["frame"], r["object"], r["pair"]))
    return dumps_jsonl(jsonable(r) for r in ordered)


def parse_fields(text: str, *, source: str = "fields") -> dict[int, dict[str, np.ndarray]]:
    """frame -> "pair:object" -> distance vector."""
    out: dict[int, dict[str, np.ndarray]] = {}
    for line_no, rec in iter_jsonl(text, source=source):
        require_keys(rec, ("frame", "object", "pair", "d"), source=source, line=line_no)
        key = f"{rec['pair']}:{rec['object']}"
        out.setdefault(int(rec["frame"]), {})[key] = np.asarray(rec["d"], dtype=float)
    return out


def format_gt(records: list[dict]) -> str:
    return dumps_jsonl(jsonable(r) for r in sorted(records, key=lambda r: r["frame"]))


def parse_gt(text: str, *, source: str = "gt") -> tuple[dict[int, GroundTruthFrame], dict[int, dict]]:
    """Returns (report-ready GT frames, raw per-frame hand pose params)."""
    frames: dict[int, GroundTruthFrame] = {}
    raw: dict[int, dict] = {}
    for line_no, rec in iter_jsonl(text, source=source):
        require_keys(rec, ("frame", "category"), source=source, line=line_no)
        try:
            frame = int(rec["frame"])
            hands = {}
            hand_params = {}
            for side, entry in rec.get("hands", {}).items():
                hands[side] = np.asarray(entry["kp"], dtype=float).reshape(21, 3)
                hand_params[side] = {
                    "root_q": np.asarray(entry["root_q"], dtype=float),
                    "root_t": np.asarray(entry["root_t"], dtype=float),
                    "angles": np.asarray(entry["angles"], dtype=float),
                }
            objects = {
                obj: SE3Pose.from_qt(entry["q"], entry["t"])
                for obj, entry in rec.get("objects", {}).items()
            }
            frames[frame] = GroundTruthFrame(
                frame=frame, category=str(rec["category"]), hand_keypoints=hands, object_poses=objects
            )
            raw[frame] = {"hands": hand_params, "objects": objects}
        except (KeyError, TypeError, ValueError) as exc:
            raise InputFormatError(f"bad ground-truth record ({exc})", source=source, line=line_no) from exc
    return frames, raw


__all__ = [
    "GroundTruthFrame",
    "HandPrediction",
    "ObjectPrediction",
    "format_fields",
    "format_gt",
    "format_hand_keypoints",
    "format_hand_poses",
    "format_object_poses",
    "hand_pose_from_record",
    "parse_fields",
    "parse_gt",
    "parse_hand_poses",
    "parse_object_poses",
]
