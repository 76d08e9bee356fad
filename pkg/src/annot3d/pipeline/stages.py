"""Pipeline stages: pure functions from input payloads to artifact files.

Each stage takes the resolved PipelineConfig plus the text contents of
the files it consumes and returns a StageResult: a map of relative output
paths to bytes, and a JSON-serializable summary. Stages never touch the
filesystem, which keeps them deterministic and lets the FastAPI service
expose them directly; the CLI handles reading and writing.

Frame-parallel work (per-frame triangulation) runs on a bounded thread
pool with results collected in frame order, so the worker count never
affects the output. Warm-started passes (IK, smoothing, tracking) are
inherently sequential per hand/object sequence.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import (
    AnnotationError,
    InputFormatError,
    InsufficientInliers,
    Unsolvable,
)
from ..fusion.detections import Detection2D, Hand, Source, parse_detections_jsonl
from ..fusion.ransac import fuse_streams, ransac_triangulate
from ..geometry.cameras import PinholeIntrinsics, unproject_fisheye_many
from ..geometry.crops import (
    CameraView,
    crop_fov_deg,
    crop_view,
    make_perspective_crop,
    warp_detections_to_crop_many,
)
from ..geometry.rig import CameraRig, parse_calibration
from ..geometry.se3 import SE3Pose
from ..errors import BehindCamera
from ..hand.ik import HandFrameResult, initial_pose_estimate, smooth_sequence, solve_ik
from ..hand.kinematics import skin
from ..hand.model import HandModel, parse_hand_model
from ..interaction.field import SpatialIndex, contact_map, interaction_field
from ..jsonio import dumps_canonical, jsonable
from ..masks.imageio import write_pgm, write_ppm
from ..masks.raster import Mask, MaskLabel, rasterize_mask, render_overlay
from ..objpose.model import ObjectModel, parse_correspondences_jsonl, parse_obj
from ..objpose.track import ObjectTrackState, track_step
from ..evalreport.report import HandPrediction, ObjectPrediction, build_report, report_to_dict, report_to_table
from .config import PipelineConfig
from .formats import (
    format_fields,
    format_hand_keypoints,
    format_hand_poses,
    format_object_poses,
    hand_pose_from_record,
    parse_fields,
    parse_gt,
    parse_hand_poses,
    parse_object_poses,
)

N_KP = 21


@dataclass
class StageResult:
    files: dict[str, bytes]
    summary: dict


def _resolved_config_file(cfg: PipelineConfig) -> bytes:
    return (dumps_canonical(cfg.to_dict()) + "\n").encode()


def _parse_calibration_text(text: str) -> CameraRig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"malformed JSON ({exc.msg})", source="calibration", line=exc.lineno) from exc
    return parse_calibration(data, source="calibration")


def _parse_hand_models(texts: dict[str, str]) -> dict[str, HandModel]:
    models = {}
    for side, text in texts.items():
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputFormatError(
                f"malformed JSON ({exc.msg})", source=f"hand_model[{side}]", line=exc.lineno
            ) from exc
        models[side] = parse_hand_model(data, source=f"hand_model[{side}]")
    return models


def _parse_object_models(texts: dict[str, tuple[str, str]]) -> dict[str, ObjectModel]:
    models = {}
    for obj_id, (obj_text, landmarks_text) in texts.items():
        landmarks = None
        if landmarks_text:
            try:
                landmarks = json.loads(landmarks_text)
            except json.JSONDecodeError as exc:
                raise InputFormatError(
                    f"malformed JSON ({exc.msg})", source=f"landmarks[{obj_id}]", line=exc.lineno
                ) from exc
        models[obj_id] = parse_obj(
            obj_text, object_id=obj_id, landmark_indices=landmarks, source=f"object_model[{obj_id}]"
        )
    return models


# -- synth -------------------------------------------------------------------


def stage_synth(cfg: PipelineConfig) -> StageResult:
    """Generate a synthetic scene with exact ground truth."""
    from ..synth.generate import generate_scene

    files, summary = generate_scene(cfg)
    files["resolved_config.json"] = _resolved_config_file(cfg)
    return StageResult(files=files, summary=summary)


# -- annotate hands ------------------------------------------------------------


_UNIT_FOCAL = PinholeIntrinsics(fx=1.0, fy=1.0, cx=0.0, cy=0.0, width=4, height=4)


def _unit_views(rig: CameraRig) -> dict[str, CameraView]:
    """One unit-focal view per camera for the ray-space coarse pass.

    Ray-space "pixels" are (x/z, y/z) of the unprojected fisheye ray, so
    reprojection errors approximate angles in radians.
    """
    return {
        cam.id: CameraView(camera_id=cam.id, intrinsics=_UNIT_FOCAL, rig_from_cam=cam.rig_from_cam)
        for cam in rig.cameras
    }


def _ray_observations(rig, unit_views, detections: list[Detection2D]):
    """Batch-unproject detections into ray-space observations per keypoint."""
    by_cam: dict[str, list[Detection2D]] = {}
    for det in detections:
        by_cam.setdefault(det.camera_id, []).append(det)
    per_kp: dict[int, list] = {}
    for cam_id in sorted(by_cam):
        dets = by_cam[cam_id]
        cam = rig.camera(cam_id)
        pixels = np.stack([d.pixel for d in dets])
        rays, valid = unproject_fisheye_many(pixels, cam.intrinsics)
        view = unit_views[cam_id]
        for det, ray, ok in zip(dets, rays, valid):
            if not ok or ray[2] <= 1e-6:
                continue
            per_kp.setdefault(det.keypoint_id, []).append((view, ray[:2] / ray[2]))
    return per_kp


def _coarse_hand_estimate(rig, unit_views, detections, cfg: PipelineConfig, seed: int):
    """Rough centroid + extent of one hand from ray-space RANSAC."""
    coarse_cfg = cfg.fusion.coarse_ransac(seed)
    points = []
    for kp, obs in sorted(_ray_observations(rig, unit_views, detections).items()):
        if len(obs) < 2:
            continue
        try:
            points.append(ransac_triangulate(obs, coarse_cfg, keypoint_id=kp).position)
        except (InsufficientInliers, AnnotationError):
            continue
    if len(points) < 3:
        return None
    pts = np.stack(points)
    centroid = pts.mean(axis=0)
    extent = float(np.max(np.linalg.norm(pts - centroid, axis=1)))
    return centroid, extent


def _warp_stream(dets: list[Detection2D], crops: dict, rig: CameraRig) -> list[Detection2D]:
    """Warp one detector stream into the per-camera crops (batched per camera)."""
    by_cam: dict[str, list[Detection2D]] = {}
    for d in dets:
        if d.camera_id in crops:
            by_cam.setdefault(d.camera_id, []).append(d)
    warped = []
    for cam_id in sorted(by_cam):
        group = by_cam[cam_id]
        pixels = np.stack([d.pixel for d in group])
        px, ok = warp_detections_to_crop_many(pixels, crops[cam_id], rig)
        for d, p, keep in zip(group, px, ok):
            if not keep:
                continue  # detection outside this view's crop: dropped
            warped.append(
                Detection2D(
                    camera_id=d.camera_id,
                    keypoint_id=d.keypoint_id,
                    hand=d.hand,
                    pixel=p,
                    score=d.score,
                    source=d.source,
                )
            )
    return warped


def _annotate_frame(frame, detections, rig, unit_views, cfg, models):
    """Triangulate both hands of one frame; returns per-hand target sets."""
    out = {}
    min_score = cfg.fusion.min_score
    ransac_cfg = cfg.fusion.ransac(cfg.seed)
    for side in sorted({d.hand.value for d in detections}):
        hand = Hand(side)
        if side not in models:
            continue
        hand_dets = [d for d in detections if d.hand == hand and d.score >= min_score]
        fullframe = [d for d in hand_dets if d.source == Source.FULLFRAME]
        crops_stream = [d for d in hand_dets if d.source == Source.CROP]
        coarse = _coarse_hand_estimate(rig, unit_views, fullframe or hand_dets, cfg, cfg.seed)
        if coarse is None:
            out[side] = None
            continue
        centroid, extent = coarse

        crops, views = {}, {}
        for cam in rig.cameras:
            try:
                fov = crop_fov_deg(
                    extent,
                    float(np.linalg.norm(centroid - cam.rig_from_cam.t)),
                    padding=cfg.crop.padding,
                    min_fov_deg=cfg.crop.fov_deg,
                    max_fov_deg=cfg.crop.max_fov_deg,
                )
                crop = make_perspective_crop(cam.id, rig, centroid, cfg.crop.size, fov)
            except BehindCamera:
                continue
            crops[cam.id] = crop
            views[cam.id] = crop_view(crop, rig)

        pools = fuse_streams(
            _warp_stream(fullframe, crops, rig), _warp_stream(crops_stream, crops, rig)
        )
        targets = np.full((N_KP, 3), np.nan)
        weights = np.zeros(N_KP)
        kp_records = []
        invalid = 0
        for (_, kp_id), dets in sorted(pools.items(), key=lambda item: item[0][1]):
            obs = [(views[d.camera_id], d.pixel) for d in dets]
            try:
                kp3d = ransac_triangulate(obs, ransac_cfg, keypoint_id=kp_id, hand=hand)
            except InsufficientInliers:
                invalid += 1
                continue
            targets[kp_id] = kp3d.position
            weights[kp_id] = kp3d.confidence
            kp_records.append(
                {
                    "frame": frame,
                    "hand": side,
                    "kp": kp_id,
                    "xyz": jsonable(kp3d.position),
                    "inliers": kp3d.inliers,
                    "e_rep": kp3d.mean_reproj_error,
                    "conf": kp3d.confidence,
                }
            )
        out[side] = {"targets": targets, "weights": weights, "keypoints": kp_records, "invalid": invalid}
    return out


def stage_annotate_hands(
    cfg: PipelineConfig,
    calibration_text: str,
    detections_text: str,
    hand_model_texts: dict[str, str],
) -> StageResult:
    """Detections -> triangulated keypoints -> IK poses -> smoothed poses."""
    rig = _parse_calibration_text(calibration_text)
    models = _parse_hand_models(hand_model_texts)
    frames = parse_detections_jsonl(detections_text, source="detections")
    frame_ids = sorted(frames)
    unit_views = _unit_views(rig)

    workers = cfg.resolved_workers()
    if workers > 1 and len(frame_ids) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            triangulated = list(
                pool.map(lambda f: _annotate_frame(f, frames[f], rig, unit_views, cfg, models), frame_ids)
            )
    else:
        triangulated = [_annotate_frame(f, frames[f], rig, unit_views, cfg, models) for f in frame_ids]

    kp_records: list[dict] = []
    unsolvable: list[dict] = []
    invalid_total = 0
    per_hand_frames: dict[str, list[tuple[int, HandFrameResult]]] = {s: [] for s in models}
    ik_cfg = cfg.ik.ik_config()
    last_result: dict[str, HandFrameResult] = {}
    for frame, per_hand in zip(frame_ids, triangulated):
        for side, data in per_hand.items():
            if data is None:
                unsolvable.append({"frame": frame, "hand": side, "reason": "coarse stage failed"})
                last_result.pop(side, None)
                continue
            kp_records.extend(data["keypoints"])
            invalid_total += data["invalid"]
            targets, weights = data["targets"], data["weights"]
            valid = weights > 0.0
            try:
                warm = last_result.get(side)
                init = warm.pose if warm is not None else initial_pose_estimate(
                    models[side], targets, weights
                )
                result = solve_ik(models[side], targets, init, weights=weights, cfg=ik_cfg)
                if warm is not None and (not result.converged or result.ik_residual > 0.005):
                    cold = solve_ik(
                        models[side],
                        targets,
                        initial_pose_estimate(models[side], targets, weights),
                        weights=weights,
                        cfg=ik_cfg,
                    )
                    if cold.ik_residual < result.ik_residual:
                        result = cold
            except (Unsolvable, AnnotationError) as exc:
                unsolvable.append({"frame": frame, "hand": side, "reason": str(exc)})
                last_result.pop(side, None)
                continue
            per_hand_frames[side].append((frame, result))
            last_result[side] = result

    pose_records: list[dict] = []
    for side, entries in per_hand_frames.items():
        results = _smooth_contiguous(entries, cfg, models[side])
        for frame, result in results:
            pose_records.append(
                {
                    "frame": frame,
                    "hand": side,
                    "root_q": jsonable(result.pose.root.q),
                    "root_t": jsonable(result.pose.root.t),
                    "angles": jsonable(result.pose.joint_angles),
                    "residual": result.ik_residual,
                    "conf": result.confidence,
                }
            )

    files = {
        cfg.paths.hand_keypoints: format_hand_keypoints(kp_records).encode(),
        cfg.paths.hand_poses: format_hand_poses(pose_records).encode(),
        "resolved_config.json": _resolved_config_file(cfg),
    }
    summary = {
        "frames": len(frame_ids),
        "solved": {side: len(v) for side, v in per_hand_frames.items()},
        "invalid_keypoints": invalid_total,
        "unsolvable": unsolvable,
    }
    return StageResult(files=files, summary=summary)


def _smooth_contiguous(entries, cfg: PipelineConfig, model: HandModel):
    """Apply the smoothing pass over runs of consecutive frame ids."""
    if cfg.ik.lambda_t == 0.0 or len(entries) < 3:
        return entries
    ik_cfg = cfg.ik.ik_config()
    out = []
    run: list[tuple[int, HandFrameResult]] = []

    def flush():
        if len(run) >= 3:
            smoothed = smooth_sequence(
                [r for _, r in run], cfg.ik.lambda_t, model, cfg=ik_cfg, sweeps=cfg.ik.smoothing_sweeps
            )
            out.extend(zip((f for f, _ in run), smoothed))
        else:
            out.extend(run)
        run.clear()

    for frame, result in entries:
        if run and frame != run[-1][0] + 1:
            flush()
        run.append((frame, result))
    flush()
    return out


# -- track object ---------------------------------------------------------------


def stage_track_object(
    cfg: PipelineConfig,
    calibration_text: str,
    correspondences_text: str,
    object_model_texts: dict[str, tuple[str, str]],
) -> StageResult:
    """Per-object refine-vs-redetect tracking over the correspondence stream."""
    rig = _parse_calibration_text(calibration_text)
    models = _parse_object_models(object_model_texts)
    corr_frames = parse_correspondences_jsonl(correspondences_text, source="correspondences")
    params = cfg.objects.track_params(cfg.seed)

    records: list[dict] = []
    mode_counts: dict[str, int] = {}
    if corr_frames:
        lo, hi = min(corr_frames), max(corr_frames)
        for obj_id in sorted(models):
            state = ObjectTrackState.initial()
            for frame in range(lo, hi + 1):
                corr = corr_frames.get(frame, {}).get(obj_id, [])
                state = track_step(
                    state,
                    corr,
                    rig=rig,
                    model=models[obj_id],
                    detect_provider=lambda c=corr: c or None,
                    params=params,
                )
                mode_counts[state.mode.value] = mode_counts.get(state.mode.value, 0) + 1
                records.append(
                    {
                        "frame": frame,
                        "object": obj_id,
                        "q": None if state.pose is None else jsonable(state.pose.q),
                        "t": None if state.pose is None else jsonable(state.pose.t),
                        "conf": state.confidence,
                        "mode": state.mode.value,
                    }
                )
    files = {
        cfg.paths.object_poses: format_object_poses(records).encode(),
        "resolved_config.json": _resolved_config_file(cfg),
    }
    return StageResult(files=files, summary={"frames": len(records), "modes": mode_counts})


# -- interaction fields -----------------------------------------------------------


def _hand_vertices_by_frame(hand_poses: dict, models: dict[str, HandModel]):
    out: dict[int, dict[str, np.ndarray]] = {}
    for (frame, side), record in hand_poses.items():
        model = models.get(side)
        if model is None:
            continue
        pose = hand_pose_from_record(record, side)
        verts, _ = skin(model, pose)
        out.setdefault(frame, {})[side] = verts
    return out


def _object_vertices_by_frame(object_poses: dict, models: dict[str, ObjectModel]):
    out: dict[int, dict[str, np.ndarray]] = {}
    for (frame, obj_id), record in object_poses.items():
        model = models.get(obj_id)
        if model is None or record["pose"] is None:
            continue
        out.setdefault(frame, {})[obj_id] = record["pose"].apply(model.vertices)
    return out


_PAIR_SIDE = {"left": "l", "right": "r"}


def stage_fields(
    cfg: PipelineConfig,
    hand_poses_text: str,
    hand_model_texts: dict[str, str],
    object_poses_text: str,
    object_model_texts: dict[str, tuple[str, str]],
) -> StageResult:
    """All four interaction fields plus hand contact maps per frame."""
    hand_models = _parse_hand_models(hand_model_texts)
    object_models = _parse_object_models(object_model_texts)
    hand_poses = parse_hand_poses(hand_poses_text, source="hand_poses")
    object_poses = parse_object_poses(object_poses_text, source="object_poses")
    hands = _hand_vertices_by_frame(hand_poses, hand_models)
    objects = _object_vertices_by_frame(object_poses, object_models)

    field_records, contact_records = [], []
    for frame in sorted(set(hands) & set(objects)):
        for obj_id, obj_verts in sorted(objects[frame].items()):
            obj_index = SpatialIndex(obj_verts)
            for side, hand_verts in sorted(hands[frame].items()):
                tag = _PAIR_SIDE[side]
                hand_index = SpatialIndex(hand_verts)
                to_obj = interaction_field(hand_verts, obj_index, source=tag, target="o")
                from_obj = interaction_field(obj_verts, hand_index, source="o", target=tag)
                field_records.append(
                    {"frame": frame, "object": obj_id, "pair": f"{tag}->o", "d": jsonable(to_obj.distances)}
                )
                field_records.append(
                    {"frame": frame, "object": obj_id, "pair": f"o->{tag}", "d": jsonable(from_obj.distances)}
                )
                contacts = contact_map(to_obj, cfg.contact_threshold_m)
                contact_records.append(
                    {
                        "frame": frame,
                        "object": obj_id,
                        "pair": f"{tag}->o",
                        "threshold": cfg.contact_threshold_m,
                        "contact": jsonable(contacts.in_contact),
                    }
                )
    files = {
        cfg.paths.fields: format_fields(field_records).encode(),
        cfg.paths.contacts: format_fields(contact_records).encode(),
        "resolved_config.json": _resolved_config_file(cfg),
    }
    summary = {"frames": len(set(hands) & set(objects)), "field_records": len(field_records)}
    return StageResult(files=files, summary=summary)


# -- masks ------------------------------------------------------------------------


_SIDE_LABEL = {"left": MaskLabel.LEFT_HAND, "right": MaskLabel.RIGHT_HAND}


def stage_masks(
    cfg: PipelineConfig,
    calibration_text: str,
    hand_poses_text: str,
    hand_model_texts: dict[str, str],
    object_poses_text: str,
    object_model_texts: dict[str, tuple[str, str]],
) -> StageResult:
    """Projection masks (PGM) and contact overlays (PPM) per frame/camera."""
    rig = _parse_calibration_text(calibration_text)
    hand_models = _parse_hand_models(hand_model_texts)
    object_models = _parse_object_models(object_model_texts)
    hand_poses = parse_hand_poses(hand_poses_text, source="hand_poses") if hand_poses_text else {}
    object_poses = (
        parse_object_poses(object_poses_text, source="object_poses") if object_poses_text else {}
    )
    hands = _hand_vertices_by_frame(hand_poses, hand_models)
    objects = _object_vertices_by_frame(object_poses, object_models)

    frames = sorted(set(hands) | set(objects))
    if cfg.masks.frames is not None:
        frames = [f for f in frames if f in set(cfg.masks.frames)]
    camera_ids = list(rig.camera_ids)
    if cfg.masks.cameras is not None:
        camera_ids = [c for c in camera_ids if c in set(cfg.masks.cameras)]

    files: dict[str, bytes] = {"resolved_config.json": _resolved_config_file(cfg)}
    count = 0
    identity = SE3Pose.identity()
    for frame in frames:
        frame_hands = hands.get(frame, {})
        frame_objects = objects.get(frame, {})
        contact_verts: dict[str, np.ndarray] = {}
        if frame_objects:
            merged_obj = np.concatenate(list(frame_objects.values()))
            obj_index = SpatialIndex(merged_obj)
            for side, verts in frame_hands.items():
                field = interaction_field(verts, obj_index)
                contact_verts[side] = contact_map(field, cfg.contact_threshold_m).in_contact
        for cam_id in camera_ids:
            cam = rig.camera(cam_id)
            masks = []
            contact_bitmap = None
            for obj_id, verts in sorted(frame_objects.items()):
                masks.append(
                    rasterize_mask(
                        verts, object_models[obj_id].faces, identity, cam,
                        cfg.masks.max_edge_px, label=MaskLabel.OBJECT,
                    )
                )
            for side, verts in sorted(frame_hands.items()):
                masks.append(
                    rasterize_mask(
                        verts, hand_models[side].faces, identity, cam,
                        cfg.masks.max_edge_px, label=_SIDE_LABEL[side],
                    )
                )
                in_contact = contact_verts.get(side)
                if in_contact is not None and in_contact.any():
                    faces = hand_models[side].faces
                    touching = faces[np.any(in_contact[faces], axis=1)]
                    if touching.size:
                        m = rasterize_mask(
                            verts, touching, identity, cam,
                            cfg.masks.max_edge_px, label=MaskLabel.CONTACT,
                        )
                        contact_bitmap = (
                            m if contact_bitmap is None else Mask(
                                width=m.width, height=m.height,
                                bitmap=contact_bitmap.bitmap | m.bitmap, label=MaskLabel.CONTACT,
                            )
                        )
            for mask in masks:
                files[f"masks/f{frame:06d}_{cam_id}_{mask.label.value}.pgm"] = write_pgm(mask.bitmap)
                count += 1
            if cfg.masks.overlay and masks:
                canvas = render_overlay(
                    cam.intrinsics.width, cam.intrinsics.height, masks, contact=contact_bitmap
                )
                files[f"overlays/f{frame:06d}_{cam_id}.ppm"] = write_ppm(canvas)
    return StageResult(files=files, summary={"masks": count, "frames": len(frames)})


# -- eval -------------------------------------------------------------------------


def _gt_fields(raw_gt, frames, hand_models, object_models, pairs_needed):
    """Recompute ground-truth interaction fields for the frames that have predictions."""
    out: dict[int, dict[str, np.ndarray]] = {}
    for frame in frames:
        entry = raw_gt.get(frame)
        if entry is None:
            continue
        obj_verts = {
            obj_id: pose.apply(object_models[obj_id].vertices)
            for obj_id, pose in entry["objects"].items()
            if obj_id in object_models
        }
        hand_verts = {}
        for side, params in entry["hands"].items():
            model = hand_models.get(side)
            if model is None:
                continue
            pose = hand_pose_from_record(params, side)
            hand_verts[side], _ = skin(model, pose)
        per_frame = {}
        for obj_id, ov in obj_verts.items():
            obj_index = SpatialIndex(ov)
            for side, hv in hand_verts.items():
                tag = _PAIR_SIDE[side]
                key_to = f"{tag}->o:{obj_id}"
                key_from = f"o->{tag}:{obj_id}"
                if key_to in pairs_needed:
                    per_frame[key_to] = interaction_field(hv, obj_index).distances
                if key_from in pairs_needed:
                    per_frame[key_from] = interaction_field(ov, SpatialIndex(hv)).distances
        if per_frame:
            out[frame] = per_frame
    return out


def stage_eval(
    cfg: PipelineConfig,
    gt_text: str,
    hand_poses_text: str = "",
    hand_model_texts: dict[str, str] | None = None,
    object_poses_text: str = "",
    fields_text: str = "",
    object_model_texts: dict[str, tuple[str, str]] | None = None,
) -> StageResult:
    """Score predictions against the ground-truth sidecar."""
    gt_frames, raw_gt = parse_gt(gt_text, source="gt")
    hand_models = _parse_hand_models(hand_model_texts or {})

    hand_preds: dict[tuple[int, str], HandPrediction] = {}
    if hand_poses_text:
        from ..hand.kinematics import keypoints_from_pose

        for (frame, side), record in parse_hand_poses(hand_poses_text, source="hand_poses").items():
            model = hand_models.get(side)
            if model is None:
                continue
            pose = hand_pose_from_record(record, side)
            hand_preds[(frame, side)] = HandPrediction(
                keypoints=keypoints_from_pose(model, pose), confidence=record["conf"]
            )

    object_preds: dict[tuple[int, str], ObjectPrediction] = {}
    if object_poses_text:
        for (frame, obj_id), record in parse_object_poses(object_poses_text, source="object_poses").items():
            confidence = record["conf"] if record["conf"] is not None else 0.0
            object_preds[(frame, obj_id)] = ObjectPrediction(pose=record["pose"], confidence=confidence)

    field_preds = parse_fields(fields_text, source="fields") if fields_text else None
    field_gt = None
    if field_preds:
        pairs_needed = {key for frame in field_preds.values() for key in frame}
        field_gt = _gt_fields(
            raw_gt, sorted(field_preds), hand_models, _parse_object_models(object_model_texts or {}), pairs_needed
        )

    report = build_report(
        gt_frames,
        hand_preds,
        object_preds,
        field_preds,
        field_gt,
        config_hash=cfg.hash(),
        seed=cfg.seed,
        hand_conf_tau=cfg.eval.hand_conf_tau,
        object_conf_tau=cfg.eval.object_conf_tau,
        frame_rate_hz=cfg.eval.frame_rate_hz,
    )
    violations = _check_thresholds(report, cfg.eval.thresholds)
    files = {
        "report.json": (dumps_canonical(report_to_dict(report)) + "\n").encode(),
        "report.txt": report_to_table(report).encode(),
        "resolved_config.json": _resolved_config_file(cfg),
    }
    summary = {
        "rows": [jsonable(r) for r in report_to_dict(report)["rows"]],
        "violations": violations,
        "passed": not violations,
    }
    return StageResult(files=files, summary=summary)


_THRESHOLD_RULES = (
    ("max_median_mpjpe_mm", "median_mpjpe_mm", False),
    ("max_p90_mpjpe_mm", "p90_mpjpe_mm", False),
    ("min_hand_yield", "hand_yield", True),
    ("max_p50_te_mm", "p50_te_mm", False),
    ("max_p50_re_deg", "p50_re_deg", False),
    ("min_object_yield", "object_yield", True),
    ("max_ade_mm", "ade_mm", False),
    ("max_acc_m_s2", "acc_m_s2", False),
)


def _check_thresholds(report, thresholds: dict) -> list[str]:
    violations = []
    for key, attr, is_min in _THRESHOLD_RULES:
        if key not in thresholds:
            continue
        bound = float(thresholds[key])
        for row in report.rows:
            value = getattr(row, attr)
            if value is None:
                continue
            if is_min and value < bound:
                violations.append(f"{row.category}: {attr}={value:.4f} below {bound}")
            if not is_min and value > bound:
                violations.append(f"{row.category}: {attr}={value:.4f} above {bound}")
    return violations
