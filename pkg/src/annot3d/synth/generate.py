"""Full synthetic scene emission: every file the pipeline stages consume.

Child random streams are derived from the master seed with fixed offsets
(one per purpose), so any regeneration with the same configuration is
byte-identical and each stream can be reproduced in isolation.
"""

from __future__ import annotations

import json

import numpy as np

from ..fusion.detections import Detection2D, Hand, Source, format_detections_jsonl
from ..geometry.rig import rig_to_dict
from ..hand.model import default_hand_model, hand_model_to_dict
from ..jsonio import dumps_canonical, jsonable
from ..objpose.model import Correspondence, ObjectModel, format_correspondences_jsonl, format_obj
from ..pipeline.formats import format_gt
from .meshes import box, icosphere
from .scene import gen_hand_sequence, gen_object_sequence, gen_rig, observe_keypoints, observe_landmarks

_SEED_HAND = {"left": 11, "right": 12}
_SEED_OBJECT = 21
_SEED_FULLFRAME = 31
_SEED_CROP = 32
_SEED_CORR = 33
_SEED_SCORES = 34


def _farthest_point_indices(vertices: np.ndarray, count: int) -> np.ndarray:
    """Deterministic well-spread subset: greedy farthest-point sampling from vertex 0."""
    chosen = [0]
    dist = np.linalg.norm(vertices - vertices[0], axis=1)
    while len(chosen) < min(count, vertices.shape[0]):
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(vertices - vertices[nxt], axis=1))
    return np.array(chosen, dtype=int)


def _build_object(settings) -> ObjectModel:
    if settings.shape == "icosphere":
        verts, faces = icosphere(subdivisions=settings.subdivisions, radius=settings.size)
    else:
        verts, faces = box((settings.size, settings.size, settings.size))
    return ObjectModel(
        id=settings.id,
        vertices=verts,
        faces=faces,
        landmark_indices=_farthest_point_indices(verts, settings.n_landmarks),
    )


def generate_scene(cfg) -> tuple[dict[str, bytes], dict]:
    """Build the scene files for `cfg.synth`; returns (files, summary)."""
    synth = cfg.synth
    paths = cfg.paths
    seed = cfg.seed
    rig = gen_rig(synth.n_exo, synth.n_ego, synth.radius_m)
    category = synth.resolved_category()
    files: dict[str, bytes] = {}
    files[paths.calibration] = (json.dumps(rig_to_dict(rig), sort_keys=True, indent=2) + "\n").encode()

    hand_models = {}
    hand_tracks = {}
    for side in synth.hands:
        model = default_hand_model(Hand(side))
        hand_models[side] = model
        poses, keypoints = gen_hand_sequence(
            model, synth.n_frames, amplitude=synth.amplitude, seed=seed + _SEED_HAND[side]
        )
        hand_tracks[side] = (poses, keypoints)
        files[paths.hand_models[side]] = (dumps_canonical(hand_model_to_dict(model)) + "\n").encode()

    objects = {}
    object_tracks = {}
    for i, obj_cfg in enumerate(synth.objects):
        model = _build_object(obj_cfg)
        objects[obj_cfg.id] = model
        track = gen_object_sequence(synth.n_frames, seed=seed + _SEED_OBJECT + i, amplitude=0.08)
        offset = np.asarray(obj_cfg.offset, dtype=float)
        from ..geometry.se3 import SE3Pose

        track = [SE3Pose(p.q, p.t + offset) for p in track]
        object_tracks[obj_cfg.id] = track
        entry = paths.object_models[obj_cfg.id]
        files[entry["obj"]] = format_obj(model).encode()
        files[entry["landmarks"]] = (dumps_canonical(model.landmark_indices) + "\n").encode()

    rng_full = np.random.default_rng(seed + _SEED_FULLFRAME)
    rng_crop = np.random.default_rng(seed + _SEED_CROP)
    rng_corr = np.random.default_rng(seed + _SEED_CORR)
    rng_scores = np.random.default_rng(seed + _SEED_SCORES)
    noise = synth.noise.noise_model(seed)

    detection_frames: dict[int, list[Detection2D]] = {}
    corr_frames: dict[int, dict[str, list[Correspondence]]] = {}
    gt_records = []
    dropped_out_of_fov = 0
    for f in range(synth.n_frames):
        dets: list[Detection2D] = []
        hands_gt = {}
        for side in synth.hands:
            poses, keypoints = hand_tracks[side]
            for source, rng in ((Source.FULLFRAME, rng_full), (Source.CROP, rng_crop)):
                observed = observe_keypoints(keypoints[f], rig, noise, rng)
                for cam_id, kp_idx, pixel in observed:
                    dets.append(
                        Detection2D(
                            camera_id=cam_id,
                            keypoint_id=kp_idx,
                            hand=Hand(side),
                            pixel=pixel,
                            score=float(rng_scores.uniform(0.4, 1.0)),
                            source=source,
                        )
                    )
            pose = poses[f]
            hands_gt[side] = {
                "kp": jsonable(keypoints[f]),
                "root_q": jsonable(pose.root.q),
                "root_t": jsonable(pose.root.t),
                "angles": jsonable(pose.joint_angles),
            }
        detection_frames[f] = dets

        objects_gt = {}
        for obj_id, model in objects.items():
            pose = object_tracks[obj_id][f]
            landmarks_rig = pose.apply(model.landmark_points)
            observed = observe_landmarks(landmarks_rig, rig, noise, rng_corr)
            corr = [
                Correspondence(camera_id=cam_id, landmark_index=lm, pixel=pixel, weight=1.0)
                for cam_id, lm, pixel in observed
            ]
            if corr:
                corr_frames.setdefault(f, {})[obj_id] = corr
            objects_gt[obj_id] = {"q": jsonable(pose.q), "t": jsonable(pose.t)}

        gt_records.append(
            {"frame": f, "category": category, "hands": hands_gt, "objects": objects_gt}
        )

    files[paths.detections] = format_detections_jsonl(detection_frames).encode()
    if objects:
        files[paths.correspondences] = format_correspondences_jsonl(corr_frames).encode()
    files[paths.gt] = format_gt(gt_records).encode()

    summary = {
        "frames": synth.n_frames,
        "cameras": len(rig.cameras),
        "hands": list(synth.hands),
        "objects": sorted(objects),
        "category": category,
        "detections": sum(len(v) for v in detection_frames.values()),
    }
    return files, summary
