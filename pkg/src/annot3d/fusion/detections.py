"""2D hand keypoint detections and their JSONL wire format.

Detections file: one record per frame,
    {"frame": int, "detections": [{"cam", "hand", "kp", "px": [u, v],
                                   "score", "source"}]}
with "px" in the source camera's (fisheye) pixel space. The two detector
streams share the format and are distinguished by "source":
"fullframe" (whole-image detector) or "crop" (dedicated hand detector).
After perspective warping the same Detection2D type carries crop-space
pixels into triangulation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInput
from ..jsonio import dumps_jsonl, iter_jsonl, require_keys

N_HAND_KEYPOINTS = 21


class Hand(str, enum.Enum):
    LEFT = "left"
    RIGHT = "right"


class Source(str, enum.Enum):
    FULLFRAME = "fullframe"
    CROP = "crop"


@dataclass(frozen=True, eq=False)
class Detection2D:
    camera_id: str
    keypoint_id: int
    hand: Hand
    pixel: np.ndarray
    score: float
    source: Source

    def __post_init__(self):
        if not 0 <= self.keypoint_id < N_HAND_KEYPOINTS:
            raise InvalidInput(f"keypoint_id {self.keypoint_id} outside 0..{N_HAND_KEYPOINTS - 1}")
        if not 0.0 <= self.score <= 1.0:
            raise InvalidInput(f"score {self.score} outside [0, 1]")
        px = np.array(self.pixel, dtype=float).reshape(2)
        px.setflags(write=False)
        object.__setattr__(self, "pixel", px)


def parse_detections_jsonl(text: str, *, source: str = "detections") -> dict[int, list[Detection2D]]:
    """Parse a detections JSONL string into frame -> detection list."""
    frames: dict[int, list[Detection2D]] = {}
    for line_no, record in iter_jsonl(text, source=source):
        require_keys(record, ("frame", "detections"), source=source, line=line_no)
        try:
            frame = int(record["frame"])
            dets = []
            for d in record["detections"]:
                dets.append(
                    Detection2D(
                        camera_id=str(d["cam"]),
                        keypoint_id=int(d["kp"]),
                        hand=Hand(d["hand"]),
                        pixel=d["px"],
                        score=float(d["score"]),
                        source=Source(d["source"]),
                    )
                )
        except (KeyError, TypeError, ValueError, InvalidInput) as exc:
            from ..errors import InputFormatError

            raise InputFormatError(f"bad detection record ({exc})", source=source, line=line_no) from exc
        frames.setdefault(frame, []).extend(dets)
    return frames


def format_detections_jsonl(frames: dict[int, list[Detection2D]]) -> str:
    records = []
    for frame in sorted(frames):
        records.append(
            {
                "frame": frame,
                "detections": [
                    {
                        "cam": d.camera_id,
                        "hand": d.hand.value,
                        "kp": d.keypoint_id,
                        "px": [float(d.pixel[0]), float(d.pixel[1])],
                        "score": d.score,
                        "source": d.source.value,
                    }
                    for d in frames[frame]
                ],
            }
        )
    return dumps_jsonl(records)
