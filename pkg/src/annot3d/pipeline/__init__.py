"""Pipeline configuration and stage orchestration shared by service and CLI."""

from .config import PipelineConfig
from .stages import (
    StageResult,
    stage_annotate_hands,
    stage_eval,
    stage_fields,
    stage_masks,
    stage_synth,
    stage_track_object,
)

__all__ = [
    "PipelineConfig",
    "StageResult",
    "stage_annotate_hands",
    "stage_eval",
    "stage_fields",
    "stage_masks",
    "stage_synth",
    "stage_track_object",
]
