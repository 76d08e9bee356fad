"""Thin CLI client for the annotation service.

Subcommands mirror the service endpoints one-to-one: the CLI only reads
input files, posts them to the service, and writes the returned
artifacts. By default requests run against an in-process instance of the
app (no socket, fully offline and deterministic); `--server URL` targets
a remote deployment instead. `annot3d serve` starts one.

All paths in `config.paths` resolve relative to the workspace directory
(`config.paths.output_dir`, overridable with -d), so one directory holds
a scene's inputs and artifacts; absolute paths are respected.

Exit codes: 0 success, 1 eval threshold violation, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import httpx

from .errors import InputFormatError
from .pipeline.config import PipelineConfig
from .service.schemas import StageResponse, decode_file

INPUT_ERROR_EXIT = 2
THRESHOLD_EXIT = 1


class _InProcessClient:
    """Posts requests straight into the ASGI app (no socket, no server)."""

    def __init__(self):
        from .service.app import create_app

        self._app = create_app()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False

    def post(self, endpoint: str, json: dict) -> httpx.Response:
        import asyncio

        async def go():
            transport = httpx.ASGITransport(app=self._app)
            async with httpx.AsyncClient(
                transport=transport, base_url="http://annot3d.local", timeout=None
            ) as client:
                return await client.post(endpoint, json=json)

        return asyncio.run(go())


def _client(server: str | None):
    if server:
        return httpx.Client(base_url=server, timeout=3600.0)
    return _InProcessClient()


def _apply_override(data: dict, dotted: str, raw_value: str) -> None:
    keys = dotted.split(".")
    node = data
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise InputFormatError(f"cannot override through non-object key {key!r}", source="--set")
    try:
        value = json.loads(raw_value)
    except json.JSONDecodeError:
        value = raw_value
    node[keys[-1]] = value


def _load_config(args) -> tuple[PipelineConfig, Path]:
    data: dict = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise InputFormatError("config file not found", source=str(path))
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise InputFormatError(f"malformed JSON ({exc.msg})", source=str(path), line=exc.lineno) from exc
    for override in args.set or []:
        if "=" not in override:
            raise InputFormatError(f"--set expects key.path=value, got {override!r}", source="--set")
        dotted, raw_value = override.split("=", 1)
        _apply_override(data, dotted, raw_value)
    if args.seed is not None:
        data["seed"] = args.seed
    if args.dir is not None:
        data.setdefault("paths", {})["output_dir"] = args.dir
    cfg = PipelineConfig.from_dict(data)
    workspace = Path(cfg.paths.output_dir)
    return cfg, workspace


def _resolve(workspace: Path, rel: str) -> Path:
    path = Path(rel)
    return path if path.is_absolute() else workspace / path


def _read_required(workspace: Path, rel: str, what: str) -> str:
    path = _resolve(workspace, rel)
    if not path.is_file():
        raise InputFormatError(f"required {what} file not found", source=str(path))
    return path.read_text()


def _read_optional(workspace: Path, rel: str) -> str:
    path = _resolve(workspace, rel)
    return path.read_text() if path.is_file() else ""


def _hand_model_payload(cfg, workspace: Path, required: bool) -> dict[str, str]:
    payload = {}
    for side, rel in sorted(cfg.paths.hand_models.items()):
        if required:
            payload[side] = _read_required(workspace, rel, f"hand model ({side})")
        else:
            text = _read_optional(workspace, rel)
            if text:
                payload[side] = text
    return payload


def _object_model_payload(cfg, workspace: Path, required: bool) -> dict[str, dict[str, str]]:
    payload = {}
    for obj_id, entry in sorted(cfg.paths.object_models.items()):
        if required:
            obj_text = _read_required(workspace, entry["obj"], f"object model ({obj_id})")
        else:
            obj_text = _read_optional(workspace, entry["obj"])
            if not obj_text:
                continue
        payload[obj_id] = {
            "obj": obj_text,
            "landmarks": _read_optional(workspace, entry.get("landmarks", "")),
        }
    return payload


def _post(client: httpx.Client, endpoint: str, body: dict) -> StageResponse:
    try:
        response = client.post(endpoint, json=body)
    except httpx.HTTPError as exc:
        raise InputFormatError(f"service request failed ({exc})", source=endpoint) from exc
    if response.status_code == 400:
        detail = response.json().get("detail", {})
        raise InputFormatError(
            detail.get("message", "bad input"),
            source=detail.get("source") or endpoint,
            line=detail.get("line"),
        )
    if response.status_code != 200:
        raise InputFormatError(f"service returned HTTP {response.status_code}", source=endpoint)
    return StageResponse.model_validate(response.json())


def _write_artifacts(workspace: Path, response: StageResponse) -> None:
    for rel, entry in sorted(response.files.items()):
        path = workspace / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(decode_file(entry))


def _print_summary(name: str, response: StageResponse) -> None:
    print(f"{name}: {json.dumps(response.summary, sort_keys=True)}")


def _run_stage(args) -> int:
    cfg, workspace = _load_config(args)
    config_payload = cfg.to_dict()
    with _client(args.server) as client:
        if args.command == "synth":
            body = {"config": config_payload}
            response = _post(client, "/v1/synth", body)
        elif args.command == "annotate-hands":
            body = {
                "config": config_payload,
                "calibration": _read_required(workspace, cfg.paths.calibration, "calibration"),
                "detections": _read_required(workspace, cfg.paths.detections, "detections"),
                "hand_models": _hand_model_payload(cfg, workspace, required=True),
            }
            response = _post(client, "/v1/hands/annotate", body)
        elif args.command == "track-object":
            body = {
                "config": config_payload,
                "calibration": _read_required(workspace, cfg.paths.calibration, "calibration"),
                "correspondences": _read_required(
                    workspace, cfg.paths.correspondences, "correspondences"
                ),
                "object_models": _object_model_payload(cfg, workspace, required=True),
            }
            response = _post(client, "/v1/objects/track", body)
        elif args.command == "fields":
            body = {
                "config": config_payload,
                "hand_poses": _read_required(workspace, cfg.paths.hand_poses, "hand poses"),
                "hand_models": _hand_model_payload(cfg, workspace, required=True),
                "object_poses": _read_required(workspace, cfg.paths.object_poses, "object poses"),
                "object_models": _object_model_payload(cfg, workspace, required=True),
            }
            response = _post(client, "/v1/fields", body)
        elif args.command == "masks":
            body = {
                "config": config_payload,
                "calibration": _read_required(workspace, cfg.paths.calibration, "calibration"),
                "hand_poses": _read_optional(workspace, cfg.paths.hand_poses),
                "hand_models": _hand_model_payload(cfg, workspace, required=False),
                "object_poses": _read_optional(workspace, cfg.paths.object_poses),
                "object_models": _object_model_payload(cfg, workspace, required=False),
            }
            response = _post(client, "/v1/masks", body)
        elif args.command == "eval":
            body = {
                "config": config_payload,
                "gt": _read_required(workspace, cfg.paths.gt, "ground truth"),
                "hand_poses": _read_optional(workspace, cfg.paths.hand_poses),
                "hand_models": _hand_model_payload(cfg, workspace, required=False),
                "object_poses": _read_optional(workspace, cfg.paths.object_poses),
                "fields": _read_optional(workspace, cfg.paths.fields),
                "object_models": _object_model_payload(cfg, workspace, required=False),
            }
            response = _post(client, "/v1/eval", body)
        else:  # pragma: no cover - argparse restricts choices
            raise AssertionError(args.command)
    _write_artifacts(workspace, response)
    _print_summary(args.command, response)
    if args.command == "eval" and not response.summary.get("passed", True):
        for violation in response.summary.get("violations", []):
            print(f"threshold violated: {violation}", file=sys.stderr)
        return THRESHOLD_EXIT
    return 0


def _serve(args) -> int:
    import uvicorn

    uvicorn.run("annot3d.service.app:app", host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="annot3d", description="Multi-view 3D hand and object annotation pipeline"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_stage(name: str, help_text: str):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("-c", "--config", help="pipeline config JSON (defaults apply if omitted)")
        p.add_argument("-d", "--dir", help="workspace directory (overrides paths.output_dir)")
        p.add_argument("--seed", type=int, help="override config seed")
        p.add_argument(
            "--set",
            action="append",
            metavar="KEY.PATH=VALUE",
            help="override any config value (JSON literal or string)",
        )
        p.add_argument("--server", help="service URL (default: run in-process)")
        p.set_defaults(func=_run_stage)
        return p

    add_stage("synth", "generate a synthetic scene with exact ground truth")
    add_stage("annotate-hands", "triangulate detections and fit hand poses")
    add_stage("track-object", "track 6DoF object poses from correspondences")
    add_stage("fields", "compute hand-object interaction fields and contacts")
    add_stage("masks", "rasterize projection masks and overlays")
    add_stage("eval", "score annotations against ground truth")

    serve = sub.add_parser("serve", help="run the annotation service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(func=_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    from .errors import AnnotationError

    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AnnotationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INPUT_ERROR_EXIT


if __name__ == "__main__":
    sys.exit(main())
