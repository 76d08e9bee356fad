"""Pipeline configuration: one JSON document, every default explicit.

Loading rejects unknown keys and validates numeric ranges (delegating to
the per-module config types where they exist). The fully resolved
configuration is emitted into every output directory as
`resolved_config.json` for provenance, and its hash stamps the quality
report.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from ..errors import InputFormatError, InvalidInput
from ..fusion.ransac import RansacConfig
from ..hand.ik import IkConfig
from ..interaction.field import DEFAULT_CONTACT_THRESHOLD_M
from ..jsonio import config_hash
from ..objpose.track import TrackParams
from ..synth.scene import NoiseModel

WORKERS_ENV_VAR = "ANNOT3D_WORKERS"


def _check_keys(data: dict, allowed: set[str], ctx: str) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise InvalidInput(f"{ctx}: unknown keys {sorted(unknown)}")


def _simple(cls, data: dict, ctx: str):
    """Build a flat dataclass from a mapping, rejecting unknown keys."""
    names = {f.name for f in fields(cls)}
    _check_keys(data, names, ctx)
    try:
        return cls(**data)
    except (TypeError, InvalidInput) as exc:
        raise InvalidInput(f"{ctx}: {exc}") from exc


@dataclass(frozen=True)
class FusionSettings:
    e_T: float = 8.0
    i_T: int = 2
    gamma: float = 1.0
    iterations: int = 200
    min_score: float = 0.3
    coarse_e_T: float = 0.02  # radians, for the ray-space coarse pass

    def __post_init__(self):
        if not 0.0 <= self.min_score <= 1.0:
            raise InvalidInput("min_score must be in [0, 1]")
        if self.coarse_e_T <= 0.0:
            raise InvalidInput("coarse_e_T must be positive")
        self.ransac(0)  # validate thresholds at load time

    def ransac(self, seed: int) -> RansacConfig:
        return RansacConfig(
            e_T=self.e_T, i_T=self.i_T, gamma=self.gamma, iterations=self.iterations, seed=seed
        )

    def coarse_ransac(self, seed: int) -> RansacConfig:
        return RansacConfig(
            e_T=self.coarse_e_T, i_T=2, gamma=self.gamma, iterations=self.iterations, seed=seed
        )


@dataclass(frozen=True)
class IkSettings:
    lambda_t: float = 0.1
    sigma_r: float = 0.005
    limit_weight: float = 10.0
    max_iterations: int = 50
    smoothing_sweeps: int = 2
    min_valid_targets: int = 6

    def __post_init__(self):
        if self.lambda_t < 0.0:
            raise InvalidInput("lambda_t must be nonnegative")
        if self.smoothing_sweeps < 1:
            raise InvalidInput("smoothing_sweeps must be at least 1")

    def ik_config(self) -> IkConfig:
        return IkConfig(
            max_iterations=self.max_iterations,
            limit_weight=self.limit_weight,
            sigma_r=self.sigma_r,
            min_valid_targets=self.min_valid_targets,
        )


@dataclass(frozen=True)
class ObjectSettings:
    tau_redetect: float = 0.5
    huber_scale_px: float = 4.0
    max_iterations: int = 100
    gpnp_restarts: int = 20

    def __post_init__(self):
        if self.huber_scale_px <= 0.0:
            raise InvalidInput("huber_scale_px must be positive")
        self.track_params(0)  # validate at load time

    def track_params(self, seed: int) -> TrackParams:
        return TrackParams(
            tau_redetect=self.tau_redetect,
            huber_scale_px=self.huber_scale_px,
            max_iterations=self.max_iterations,
            gpnp_restarts=self.gpnp_restarts,
            seed=seed,
        )


@dataclass(frozen=True)
class CropSettings:
    size: int = 256
    fov_deg: float = 60.0
    max_fov_deg: float = 100.0
    padding: float = 1.5

    def __post_init__(self):
        if self.size < 16:
            raise InvalidInput("crop size must be at least 16 px")
        if not 0.0 < self.fov_deg <= self.max_fov_deg < 180.0:
            raise InvalidInput("need 0 < fov_deg <= max_fov_deg < 180")


@dataclass(frozen=True)
class MaskSettings:
    max_edge_px: float = 8.0
    cameras: tuple[str, ...] | None = None  # None: every camera
    frames: tuple[int, ...] | None = None   # None: every annotated frame
    overlay: bool = True

    def __post_init__(self):
        if self.cameras is not None:
            object.__setattr__(self, "cameras", tuple(str(c) for c in self.cameras))
        if self.frames is not None:
            object.__setattr__(self, "frames", tuple(int(f) for f in self.frames))


_THRESHOLD_KEYS = {
    "max_median_mpjpe_mm",
    "max_p90_mpjpe_mm",
    "min_hand_yield",
    "max_p50_te_mm",
    "max_p50_re_deg",
    "min_object_yield",
    "max_ade_mm",
    "max_acc_m_s2",
}


@dataclass(frozen=True)
class EvalSettings:
    hand_conf_tau: float = 0.5
    object_conf_tau: float = 0.5
    frame_rate_hz: float = 60.0
    thresholds: dict = field(default_factory=dict)

    def __post_init__(self):
        _check_keys(dict(self.thresholds), _THRESHOLD_KEYS, "eval.thresholds")
        object.__setattr__(self, "thresholds", dict(self.thresholds))


@dataclass(frozen=True)
class SynthObjectSettings:
    id: str = "toy"
    shape: str = "icosphere"
    size: float = 0.05
    subdivisions: int = 2
    n_landmarks: int = 12
    offset: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.shape not in ("icosphere", "box"):
            raise InvalidInput(f"unknown synth object shape {self.shape!r}")
        if self.n_landmarks < 6:
            raise InvalidInput("objects need at least 6 landmarks for pose solving")
        object.__setattr__(self, "offset", tuple(float(v) for v in self.offset))


@dataclass(frozen=True)
class NoiseSettings:
    pixel_sigma: float = 0.0
    outlier_rate: float = 0.0
    outlier_magnitude: float = 50.0
    dropout_rate: float = 0.0

    def __post_init__(self):
        self.noise_model(0)  # validate rates at load time

    def noise_model(self, seed: int) -> NoiseModel:
        return NoiseModel(
            pixel_sigma=self.pixel_sigma,
            outlier_rate=self.outlier_rate,
            outlier_magnitude=self.outlier_magnitude,
            dropout_rate=self.dropout_rate,
            seed=seed,
        )


@dataclass(frozen=True)
class SynthSettings:
    n_frames: int = 120
    n_exo: int = 8
    n_ego: int = 2
    radius_m: float = 0.9
    hands: tuple[str, ...] = ("left", "right")
    amplitude: float = 0.5
    category: str | None = None
    objects: tuple[SynthObjectSettings, ...] = (SynthObjectSettings(),)
    noise: NoiseSettings = field(default_factory=NoiseSettings)

    def __post_init__(self):
        if self.n_frames < 1:
            raise InvalidInput("n_frames must be positive")
        hands = tuple(str(h) for h in self.hands)
        if any(h not in ("left", "right") for h in hands):
            raise InvalidInput("hands entries must be 'left' or 'right'")
        object.__setattr__(self, "hands", hands)
        object.__setattr__(self, "objects", tuple(self.objects))

    def resolved_category(self) -> str:
        if self.category:
            return self.category
        if self.objects:
            return "hand-object"
        return "hand-hand" if len(self.hands) == 2 else "no-interaction"


@dataclass(frozen=True)
class PathsConfig:
    calibration: str = "calibration.json"
    detections: str = "detections.jsonl"
    hand_models: dict = field(default_factory=lambda: {"left": "hand_left.json", "right": "hand_right.json"})
    object_models: dict = field(default_factory=lambda: {"toy": {"obj": "toy.obj", "landmarks": "toy_landmarks.json"}})
    correspondences: str = "correspondences.jsonl"
    gt: str = "gt.jsonl"
    hand_keypoints: str = "hand_keypoints.jsonl"
    hand_poses: str = "hand_poses.jsonl"
    object_poses: str = "object_poses.jsonl"
    fields: str = "fields.jsonl"
    contacts: str = "contacts.jsonl"
    output_dir: str = "out"

    def __post_init__(self):
        for obj_id, entry in dict(self.object_models).items():
            _check_keys(dict(entry), {"obj", "landmarks"}, f"paths.object_models[{obj_id}]")


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    workers: int | None = None
    contact_threshold_m: float = DEFAULT_CONTACT_THRESHOLD_M
    paths: PathsConfig = field(default_factory=PathsConfig)
    fusion: FusionSettings = field(default_factory=FusionSettings)
    ik: IkSettings = field(default_factory=IkSettings)
    objects: ObjectSettings = field(default_factory=ObjectSettings)
    crop: CropSettings = field(default_factory=CropSettings)
    masks: MaskSettings = field(default_factory=MaskSettings)
    eval: EvalSettings = field(default_factory=EvalSettings)
    synth: SynthSettings = field(default_factory=SynthSettings)

    def __post_init__(self):
        if self.contact_threshold_m <= 0.0:
            raise InvalidInput("contact_threshold_m must be positive")
        if self.workers is not None and self.workers < 1:
            raise InvalidInput("workers must be at least 1")

    @staticmethod
    def from_dict(data: dict) -> "PipelineConfig":
        if not isinstance(data, dict):
            raise InvalidInput("config must be a JSON object")
        allowed = {f.name for f in fields(PipelineConfig)}
        _check_keys(data, allowed, "config")
        kwargs: dict[str, Any] = {}
        for key in ("seed", "workers", "contact_threshold_m"):
            if key in data:
                kwargs[key] = data[key]
        if "paths" in data:
            kwargs["paths"] = _simple(PathsConfig, dict(data["paths"]), "config.paths")
        if "fusion" in data:
            kwargs["fusion"] = _simple(FusionSettings, dict(data["fusion"]), "config.fusion")
        if "ik" in data:
            kwargs["ik"] = _simple(IkSettings, dict(data["ik"]), "config.ik")
        if "objects" in data:
            kwargs["objects"] = _simple(ObjectSettings, dict(data["objects"]), "config.objects")
        if "crop" in data:
            kwargs["crop"] = _simple(CropSettings, dict(data["crop"]), "config.crop")
        if "masks" in data:
            kwargs["masks"] = _simple(MaskSettings, dict(data["masks"]), "config.masks")
        if "eval" in data:
            kwargs["eval"] = _simple(EvalSettings, dict(data["eval"]), "config.eval")
        if "synth" in data:
            synth = dict(data["synth"])
            if "objects" in synth:
                synth["objects"] = tuple(
                    _simple(SynthObjectSettings, dict(o), "config.synth.objects[]")
                    for o in synth["objects"]
                )
            if "noise" in synth:
                synth["noise"] = _simple(NoiseSettings, dict(synth["noise"]), "config.synth.noise")
            kwargs["synth"] = _simple(SynthSettings, synth, "config.synth")
        try:
            return PipelineConfig(**kwargs)
        except (TypeError, InvalidInput) as exc:
            raise InvalidInput(f"config: {exc}") from exc

    @staticmethod
    def from_json(text: str, *, source: str = "config") -> "PipelineConfig":
        try:
            data = json.loads(text) if text.strip() else {}
        except json.JSONDecodeError as exc:
            raise InputFormatError(f"malformed JSON ({exc.msg})", source=source, line=exc.lineno) from exc
        try:
            return PipelineConfig.from_dict(data)
        except InvalidInput as exc:
            raise InputFormatError(str(exc), source=source) from exc

    @staticmethod
    def load(path: str | Path) -> "PipelineConfig":
        return PipelineConfig.from_json(Path(path).read_text(), source=str(path))

    def to_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        return config_hash(self.to_dict())

    def resolved_workers(self) -> int:
        env = os.environ.get(WORKERS_ENV_VAR)
        if env:
            try:
                value = int(env)
            except ValueError as exc:
                raise InvalidInput(f"{WORKERS_ENV_VAR} must be an integer, got {env!r}") from exc
            if value < 1:
                raise InvalidInput(f"{WORKERS_ENV_VAR} must be >= 1")
            return value
        if self.workers is not None:
            return self.workers
        return os.cpu_count() or 1
