"""Pydantic request/response models for the annotation service.

Bulk data travels in the exact file formats the pipeline defines
(calibration JSON, detections/correspondences/poses JSONL, OBJ text)
embedded as strings, so a client can post file contents verbatim and
write response artifacts back to disk unchanged. Binary artifacts (PGM
masks, PPM overlays) are returned base64-encoded.
"""

from __future__ import annotations

import base64

from pydantic import BaseModel, ConfigDict, Field


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SynthRequest(StrictModel):
    config: dict = Field(default_factory=dict, description="PipelineConfig document")


class AnnotateHandsRequest(StrictModel):
    config: dict = Field(default_factory=dict)
    calibration: str = Field(description="calibration JSON text")
    detections: str = Field(description="detections JSONL text")
    hand_models: dict[str, str] = Field(description="side -> hand model JSON text")


class ObjectModelPayload(StrictModel):
    obj: str = Field(description="OBJ text (v/f lines)")
    landmarks: str = Field(default="", description="JSON list of landmark vertex indices")


class TrackObjectRequest(StrictModel):
    config: dict = Field(default_factory=dict)
    calibration: str
    correspondences: str = Field(description="correspondences JSONL text")
    object_models: dict[str, ObjectModelPayload]


class FieldsRequest(StrictModel):
    config: dict = Field(default_factory=dict)
    hand_poses: str = Field(description="hand poses JSONL text")
    hand_models: dict[str, str] = Field(default_factory=dict)
    object_poses: str = Field(description="object poses JSONL text")
    object_models: dict[str, ObjectModelPayload] = Field(default_factory=dict)


class MasksRequest(StrictModel):
    config: dict = Field(default_factory=dict)
    calibration: str
    hand_poses: str = ""
    hand_models: dict[str, str] = Field(default_factory=dict)
    object_poses: str = ""
    object_models: dict[str, ObjectModelPayload] = Field(default_factory=dict)


class EvalRequest(StrictModel):
    config: dict = Field(default_factory=dict)
    gt: str = Field(description="ground-truth sidecar JSONL text")
    hand_poses: str = ""
    hand_models: dict[str, str] = Field(default_factory=dict)
    object_poses: str = ""
    fields: str = ""
    object_models: dict[str, ObjectModelPayload] = Field(default_factory=dict)


class ArtifactFile(StrictModel):
    encoding: str = Field(description="'text' or 'base64'")
    content: str


class StageResponse(StrictModel):
    files: dict[str, ArtifactFile]
    summary: dict


class HealthResponse(StrictModel):
    status: str
    version: str


class ErrorDetail(StrictModel):
    error: str
    message: str
    source: str = ""
    line: int | None = None


def encode_files(files: dict[str, bytes]) -> dict[str, ArtifactFile]:
    out = {}
    for path, blob in files.items():
        try:
            out[path] = ArtifactFile(encoding="text", content=blob.decode("utf-8"))
        except UnicodeDecodeError:
            out[path] = ArtifactFile(encoding="base64", content=base64.b64encode(blob).decode("ascii"))
    return out


def decode_file(entry: ArtifactFile) -> bytes:
    if entry.encoding == "text":
        return entry.content.encode("utf-8")
    if entry.encoding == "base64":
        return base64.b64decode(entry.content)
    raise ValueError(f"unknown artifact encoding {entry.encoding!r}")
