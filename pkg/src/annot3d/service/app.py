"""FastAPI application wrapping the pipeline stages.

Every endpoint is stateless and deterministic for a fixed request body.
Malformed payloads (bad JSONL lines, invalid configs, broken models)
return 400 with a structured detail naming the offending source and
line; these map to the CLI's input-error exit code.
"""

from __future__ import annotations

from fastapi import FastAPI

from .. import __version__
from ..errors import AnnotationError, InputFormatError
from ..pipeline.config import PipelineConfig
from ..pipeline.stages import (
    StageResult,
    stage_annotate_hands,
    stage_eval,
    stage_fields,
    stage_masks,
    stage_synth,
    stage_track_object,
)
from .schemas import (
    AnnotateHandsRequest,
    ErrorDetail,
    EvalRequest,
    FieldsRequest,
    HealthResponse,
    MasksRequest,
    StageResponse,
    SynthRequest,
    TrackObjectRequest,
    encode_files,
)


def _config(data: dict) -> PipelineConfig:
    return PipelineConfig.from_dict(data or {})


def _respond(result: StageResult) -> StageResponse:
    return StageResponse(files=encode_files(result.files), summary=result.summary)


def _object_models(payload) -> dict[str, tuple[str, str]]:
    return {obj_id: (entry.obj, entry.landmarks) for obj_id, entry in payload.items()}


def create_app() -> FastAPI:
    app = FastAPI(
        title="annot3d",
        version=__version__,
        description="Multi-view 3D hand and object annotation service",
    )

    @app.exception_handler(InputFormatError)
    async def _input_error(request, exc: InputFormatError):
        from fastapi.responses import JSONResponse

        detail = ErrorDetail(
            error=type(exc).__name__, message=exc.bare_message, source=exc.source, line=exc.line
        )
        return JSONResponse(status_code=400, content={"detail": detail.model_dump()})

    @app.exception_handler(AnnotationError)
    async def _annotation_error(request, exc: AnnotationError):
        from fastapi.responses import JSONResponse

        detail = ErrorDetail(error=type(exc).__name__, message=str(exc))
        return JSONResponse(status_code=400, content={"detail": detail.model_dump()})

    @app.get("/healthz", response_model=HealthResponse)
    async def healthz() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/v1/synth", response_model=StageResponse)
    def synth(request: SynthRequest) -> StageResponse:
        return _respond(stage_synth(_config(request.config)))

    @app.post("/v1/hands/annotate", response_model=StageResponse)
    def annotate_hands(request: AnnotateHandsRequest) -> StageResponse:
        return _respond(
            stage_annotate_hands(
                _config(request.config), request.calibration, request.detections, request.hand_models
            )
        )

    @app.post("/v1/objects/track", response_model=StageResponse)
    def track_object(request: TrackObjectRequest) -> StageResponse:
        return _respond(
            stage_track_object(
                _config(request.config),
                request.calibration,
                request.correspondences,
                _object_models(request.object_models),
            )
        )

    @app.post("/v1/fields", response_model=StageResponse)
    def fields(request: FieldsRequest) -> StageResponse:
        return _respond(
            stage_fields(
                _config(request.config),
                request.hand_poses,
                request.hand_models,
                request.object_poses,
                _object_models(request.object_models),
            )
        )

    @app.post("/v1/masks", response_model=StageResponse)
    def masks(request: MasksRequest) -> StageResponse:
        return _respond(
            stage_masks(
                _config(request.config),
                request.calibration,
                request.hand_poses,
                request.hand_models,
                request.object_poses,
                _object_models(request.object_models),
            )
        )

    @app.post("/v1/eval", response_model=StageResponse)
    def evaluate(request: EvalRequest) -> StageResponse:
        return _respond(
            stage_eval(
                _config(request.config),
                request.gt,
                request.hand_poses,
                request.hand_models,
                request.object_poses,
                request.fields,
                _object_models(request.object_models),
            )
        )

    return app


app = create_app()
