import base64

import pytest
from fastapi.testclient import TestClient

from annot3d.service.app import create_app

SMALL_SCENE = {
    "seed": 5,
    "workers": 1,
    "synth": {
        "n_frames": 6,
        "n_exo": 6,
        "n_ego": 2,
        "amplitude": 0.3,
        "noise": {"pixel_sigma": 0.5, "dropout_rate": 0.05},
    },
    "masks": {"frames": [0], "cameras": ["exo0"]},
}


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


@pytest.fixture(scope="module")
def scene(client):
    response = client.post("/v1/synth", json={"config": SMALL_SCENE})
    assert response.status_code == 200
    return response.json()


def _text(scene, name):
    entry = scene["files"][name]
    assert entry["encoding"] == "text"
    return entry["content"]


def _object_models(scene):
    return {"toy": {"obj": _text(scene, "toy.obj"), "landmarks": _text(scene, "toy_landmarks.json")}}


def _hand_models(scene):
    return {"left": _text(scene, "hand_left.json"), "right": _text(scene, "hand_right.json")}


def test_healthz(client):
    response = client.get("/healthz")
    assert response.status_code == 200
    assert response.json()["status"] == "ok"


def test_synth_emits_expected_files(scene):
    files = set(scene["files"])
    assert {
        "calibration.json",
        "detections.jsonl",
        "correspondences.jsonl",
        "gt.jsonl",
        "hand_left.json",
        "hand_right.json",
        "toy.obj",
        "toy_landmarks.json",
        "resolved_config.json",
    } <= files
    assert scene["summary"]["frames"] == 6


def test_full_service_round_trip(client, scene):
    hands = client.post(
        "/v1/hands/annotate",
        json={
            "config": SMALL_SCENE,
            "calibration": _text(scene, "calibration.json"),
            "detections": _text(scene, "detections.jsonl"),
            "hand_models": _hand_models(scene),
        },
    )
    assert hands.status_code == 200
    assert hands.json()["summary"]["solved"] == {"left": 6, "right": 6}

    track = client.post(
        "/v1/objects/track",
        json={
            "config": SMALL_SCENE,
            "calibration": _text(scene, "calibration.json"),
            "correspondences": _text(scene, "correspondences.jsonl"),
            "object_models": _object_models(scene),
        },
    )
    assert track.status_code == 200

    fields = client.post(
        "/v1/fields",
        json={
            "config": SMALL_SCENE,
            "hand_poses": _text(hands.json(), "hand_poses.jsonl"),
            "hand_models": _hand_models(scene),
            "object_poses": _text(track.json(), "object_poses.jsonl"),
            "object_models": _object_models(scene),
        },
    )
    assert fields.status_code == 200
    assert fields.json()["summary"]["field_records"] == 6 * 4

    masks = client.post(
        "/v1/masks",
        json={
            "config": SMALL_SCENE,
            "calibration": _text(scene, "calibration.json"),
            "hand_poses": _text(hands.json(), "hand_poses.jsonl"),
            "hand_models": _hand_models(scene),
            "object_poses": _text(track.json(), "object_poses.jsonl"),
            "object_models": _object_models(scene),
        },
    )
    assert masks.status_code == 200
    mask_files = [p for p in masks.json()["files"] if p.endswith(".pgm")]
    assert mask_files
    entry = masks.json()["files"][mask_files[0]]
    assert entry["encoding"] == "base64"
    assert base64.b64decode(entry["content"]).startswith(b"P5\n")

    evaluation = client.post(
        "/v1/eval",
        json={
            "config": SMALL_SCENE,
            "gt": _text(scene, "gt.jsonl"),
            "hand_poses": _text(hands.json(), "hand_poses.jsonl"),
            "hand_models": _hand_models(scene),
            "object_poses": _text(track.json(), "object_poses.jsonl"),
            "fields": _text(fields.json(), "fields.jsonl"),
            "object_models": _object_models(scene),
        },
    )
    assert evaluation.status_code == 200
    body = evaluation.json()
    assert body["summary"]["passed"] is True
    row = body["summary"]["rows"][0]
    assert row["median_mpjpe_mm"] < 2.0
    assert row["p50_te_mm"] < 2.0


def test_malformed_jsonl_maps_to_400_with_line(client, scene):
    bad = _text(scene, "detections.jsonl").splitlines()
    bad[1] = "{broken"
    response = client.post(
        "/v1/hands/annotate",
        json={
            "config": SMALL_SCENE,
            "calibration": _text(scene, "calibration.json"),
            "detections": "\n".join(bad),
            "hand_models": _hand_models(scene),
        },
    )
    assert response.status_code == 400
    detail = response.json()["detail"]
    assert detail["error"] == "InputFormatError"
    assert detail["line"] == 2


def test_invalid_config_rejected(client):
    response = client.post("/v1/synth", json={"config": {"nonsense": 1}})
    assert response.status_code == 400
    assert "unknown keys" in response.json()["detail"]["message"]


def test_extra_request_fields_rejected(client):
    response = client.post("/v1/synth", json={"config": {}, "bogus": True})
    assert response.status_code == 422


def test_synth_deterministic(client):
    a = client.post("/v1/synth", json={"config": SMALL_SCENE}).json()
    b = client.post("/v1/synth", json={"config": SMALL_SCENE}).json()
    assert a["files"] == b["files"]
