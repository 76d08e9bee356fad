"""Quality report: per-category error/yield rows with provenance.

Inputs are parsed streams keyed by frame id: a ground-truth sidecar (with
per-frame category tags), predicted hand keypoints + confidences,
predicted object poses + confidences, and optional interaction fields.
Rows are grouped by the sidecar's category tags; metric columns appear
only where the corresponding stream has data. Values reported:

    median/P90 of per-(frame,hand) MPJPE (mm), hand yield at the
    confidence threshold, P50 translation/rotation error and object
    yield, field ADE (mm) and ACC (m/s^2).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import FrameMismatch
from ..geometry.se3 import SE3Pose
from ..objpose.metrics import rotation_error, translation_error
from .metrics import mpjpe, percentile, yield_rate


@dataclass(frozen=True)
class ReportRow:
    category: str
    median_mpjpe_mm: float | None = None
    p90_mpjpe_mm: float | None = None
    hand_yield: float | None = None
    p50_te_mm: float | None = None
    p50_re_deg: float | None = None
    object_yield: float | None = None
    ade_mm: float | None = None
    acc_m_s2: float | None = None


@dataclass(frozen=True)
class QualityReport:
    rows: tuple[ReportRow, ...]
    config_hash: str
    seed: int
    n_frames: int

    def row(self, category: str) -> ReportRow:
        for r in self.rows:
            if r.category == category:
                return r
        raise KeyError(category)


@dataclass
class GroundTruthFrame:
    frame: int
    category: str
    hand_keypoints: dict[str, np.ndarray] = field(default_factory=dict)  # side -> (21, 3)
    object_poses: dict[str, SE3Pose] = field(default_factory=dict)


@dataclass
class HandPrediction:
    keypoints: np.ndarray  # (21, 3)
    confidence: float


@dataclass
class ObjectPrediction:
    pose: SE3Pose | None
    confidence: float


def build_report(
    gt_frames: dict[int, GroundTruthFrame],
    hand_preds: dict[tuple[int, str], HandPrediction] | None = None,
    object_preds: dict[tuple[int, str], ObjectPrediction] | None = None,
    field_preds: dict[int, dict[str, np.ndarray]] | None = None,
    field_gt: dict[int, dict[str, np.ndarray]] | None = None,
    *,
    config_hash: str = "",
    seed: int = 0,
    hand_conf_tau: float = 0.5,
    object_conf_tau: float = 0.5,
    frame_rate_hz: float = 60.0,
) -> QualityReport:
    """Aggregate prediction streams against the ground-truth sidecar.

    Every predicted frame id must exist in the sidecar (FrameMismatch
    otherwise). Yield counts a ground-truth entry with no prediction as
    an invalid frame, so dropped frames lower the yield.
    """
    hand_preds = hand_preds or {}
    object_preds = object_preds or {}
    for frame, _ in hand_preds:
        if frame not in gt_frames:
            raise FrameMismatch(f"hand prediction for unknown frame {frame}")
    for frame, _ in object_preds:
        if frame not in gt_frames:
            raise FrameMismatch(f"object prediction for unknown frame {frame}")
    if field_preds:
        for frame in field_preds:
            if frame not in gt_frames:
                raise FrameMismatch(f"field prediction for unknown frame {frame}")

    categories = sorted({g.category for g in gt_frames.values()})
    rows = []
    for category in categories:
        frames = sorted(f for f, g in gt_frames.items() if g.category == category)
        mpjpes, hand_confs = [], []
        tes, res, obj_confs = [], [], []
        ade_values = []
        acc_series: dict[str, list[np.ndarray]] = {}
        for f in frames:
            gt = gt_frames[f]
            for side, gt_kp in gt.hand_keypoints.items():
                pred = hand_preds.get((f, side))
                if pred is None:
                    hand_confs.append(0.0)
                    continue
                hand_confs.append(pred.confidence)
                mpjpes.append(mpjpe(pred.keypoints, gt_kp))
            for obj, gt_pose in gt.object_poses.items():
                pred = object_preds.get((f, obj))
                if pred is None or pred.pose is None:
                    obj_confs.append(0.0)
                    continue
                obj_confs.append(pred.confidence)
                tes.append(translation_error(pred.pose, gt_pose) * 1000.0)
                res.append(rotation_error(pred.pose, gt_pose))
            if field_preds is not None and field_gt is not None and f in field_preds:
                for pair, pred_d in field_preds[f].items():
                    gt_d = field_gt.get(f, {}).get(pair)
                    if gt_d is None:
                        continue
                    ade_values.append(np.abs(np.asarray(pred_d) - np.asarray(gt_d)))
                    acc_series.setdefault(pair, []).append(np.asarray(pred_d))

        row = ReportRow(
            category=category,
            median_mpjpe_mm=percentile(mpjpes, 50.0) if mpjpes else None,
            p90_mpjpe_mm=percentile(mpjpes, 90.0) if mpjpes else None,
            hand_yield=yield_rate(hand_confs, hand_conf_tau) if hand_confs else None,
            p50_te_mm=percentile(tes, 50.0) if tes else None,
            p50_re_deg=percentile(res, 50.0) if res else None,
            object_yield=yield_rate(obj_confs, object_conf_tau) if obj_confs else None,
            ade_mm=float(np.mean(np.concatenate(ade_values)) * 1000.0) if ade_values else None,
            acc_m_s2=_mean_acc(acc_series, frame_rate_hz),
        )
        rows.append(row)
    return QualityReport(
        rows=tuple(rows), config_hash=config_hash, seed=seed, n_frames=len(gt_frames)
    )


def _mean_acc(series: dict[str, list[np.ndarray]], rate: float) -> float | None:
    values = []
    for frames in series.values():
        if len(frames) < 3:
            continue
        arr = np.stack(frames)
        second = arr[:-2] - 2.0 * arr[1:-1] + arr[2:]
        values.append(np.abs(second).reshape(-1))
    if not values:
        return None
    return float(np.mean(np.concatenate(values)) * rate**2)


_COLUMNS = (
    ("category", "category", "{}"),
    ("median_mpjpe_mm", "medMPJPE(mm)", "{:.3f}"),
    ("p90_mpjpe_mm", "p90MPJPE(mm)", "{:.3f}"),
    ("hand_yield", "handYield", "{:.3f}"),
    ("p50_te_mm", "p50TE(mm)", "{:.3f}"),
    ("p50_re_deg", "p50RE(deg)", "{:.3f}"),
    ("object_yield", "objYield", "{:.3f}"),
    ("ade_mm", "ADE(mm)", "{:.3f}"),
    ("acc_m_s2", "ACC(m/s2)", "{:.3f}"),
)


def report_to_dict(report: QualityReport) -> dict:
    return {
        "provenance": {
            "config_hash": report.config_hash,
            "seed": report.seed,
            "n_frames": report.n_frames,
        },
        "rows": [
            {name: getattr(row, name) for name, _, _ in _COLUMNS if getattr(row, name) is not None}
            for row in report.rows
        ],
    }


def report_to_table(report: QualityReport) -> str:
    """Aligned-column text table with '-' for inapplicable cells."""
    cells = []
    for row in report.rows:
        rendered = []
        for name, _, fmt in _COLUMNS:
            value = getattr(row, name)
            rendered.append("-" if value is None else fmt.format(value))
        cells.append(rendered)
    headers = [header for _, header, _ in _COLUMNS]
    widths = [
        max(len(headers[i]), *(len(r[i]) for r in cells)) if cells else len(headers[i])
        for i in range(len(headers))
    ]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for rendered in cells:
        lines.append("  ".join(v.ljust(w) for v, w in zip(rendered, widths)))
    lines.append("")
    lines.append(
        f"frames={report.n_frames} seed={report.seed} config={report.config_hash}"
    )
    return "\n".join(lines) + "\n"
