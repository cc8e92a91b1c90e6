import base64
import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

import specwalk as sw
from specwalk.service.app import create_app
from specwalk.service.sessions import rle_encode


@pytest.fixture(scope="module")
def served(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("svc")
    ph = sw.make_phantom("blobs2d", (16, 12), rng_seed=2, noise_sigma=0.04,
                         num_regions=2)
    sw.save_image(ph.image, tmp / "img")
    for beta in (10.0, 30.0):
        sw.save_pack(sw.precompute(ph.image, beta, m=48),
                     tmp / f"pack{beta:g}.rwpk")
    app = create_app()
    client = TestClient(app)
    return client, tmp, ph


def make_session(client, tmp, **over):
    body = {"image_path": str(tmp / "img.json"),
            "pack_paths": [str(tmp / "pack10.rwpk"),
                           str(tmp / "pack30.rwpk")]}
    body.update(over)
    resp = client.post("/sessions", json=body)
    assert resp.status_code == 200, resp.text
    return resp.json()


def seeds_for(ph, per_region=3, seed=0):
    seeds = sw.sample_region_seeds(ph.labels.labels, 2, per_region,
                                   np.random.default_rng(seed))
    return [{"index": int(i), "label": int(l)}
            for i, l in zip(seeds.seed_indices, seeds.seed_labels)]


def test_rle_encode_round_trip():
    arr = np.array([0, 0, 1, 1, 1, 0, 2])
    rle = rle_encode(arr)
    assert rle == [(0, 2), (1, 3), (0, 1), (2, 1)]
    decoded = np.concatenate([[v] * c for v, c in rle])
    assert np.array_equal(decoded, arr)


def test_create_and_info(served):
    client, tmp, ph = served
    info = make_session(client, tmp)
    assert info["dims"] == [16, 12]
    assert info["num_labels"] is None
    assert info["beta"] == 10.0
    got = client.get(f"/sessions/{info['id']}").json()
    assert got["id"] == info["id"]


def test_create_validates_paths(served):
    client, tmp, _ = served
    resp = client.post("/sessions", json={
        "image_path": str(tmp / "missing.json"), "pack_paths": ["x"]})
    assert resp.status_code == 422


def test_unknown_session_404(served):
    client, _, _ = served
    assert client.get("/sessions/nope").status_code == 404
    assert client.delete("/sessions/nope").status_code == 404


def test_slice_png(served):
    client, tmp, ph = served
    info = make_session(client, tmp)
    resp = client.get(f"/sessions/{info['id']}/slice")
    assert resp.status_code == 200
    assert resp.headers["content-type"] == "image/png"
    from PIL import Image as PilImage
    import io
    img = PilImage.open(io.BytesIO(resp.content))
    assert img.size == (16, 12)          # (width, height)


def test_seeds_solve_and_idempotency(served):
    client, tmp, ph = served
    info = make_session(client, tmp)
    body = {"seeds": seeds_for(ph)}
    r1 = client.post(f"/sessions/{info['id']}/seeds", json=body)
    assert r1.status_code == 200, r1.text
    payload = r1.json()
    assert payload["num_labels"] == 2
    assert payload["m_use"] >= 2
    assert payload["online_ms"] > 0
    total = sum(c for _, c in payload["labels_rle"])
    assert total == 16 * 12
    max_prob = np.frombuffer(base64.b64decode(payload["max_prob_b64"]),
                             dtype=np.uint8)
    assert max_prob.size == 16 * 12
    assert max_prob.max() == 255         # seeds are certain
    r2 = client.post(f"/sessions/{info['id']}/seeds", json=body)
    assert r2.json()["labels_rle"] == payload["labels_rle"]
    assert client.get(f"/sessions/{info['id']}").json()["num_labels"] == 2


def test_beta_change_flags_refresh(served):
    client, tmp, ph = served
    info = make_session(client, tmp)
    r = client.put(f"/sessions/{info['id']}/params", json={"beta": 25.0})
    assert r.status_code == 200
    out = r.json()
    assert out["refreshed"] is True
    assert out["base_beta"] == 30.0      # log-nearest base
    solved = client.post(f"/sessions/{info['id']}/seeds",
                         json={"seeds": seeds_for(ph)}).json()
    assert solved["refreshed"] is True
    assert solved["base_beta"] == 30.0
    # unchanged beta does not re-refresh
    r2 = client.put(f"/sessions/{info['id']}/params", json={"beta": 25.0})
    assert r2.json()["refreshed"] is False


def test_invalid_seeds_422(served):
    client, tmp, ph = served
    info = make_session(client, tmp)
    r = client.post(f"/sessions/{info['id']}/seeds",
                    json={"seeds": [{"index": 10_000, "label": 0}]})
    assert r.status_code == 422
    r = client.post(f"/sessions/{info['id']}/seeds", json={"seeds": []})
    assert r.status_code == 422


def test_solve_in_flight_409(served):
    client, tmp, ph = served
    info = make_session(client, tmp)
    store = client.app.state.store
    session = store.get(info["id"])
    assert session.lock.acquire(blocking=False)
    try:
        r = client.post(f"/sessions/{info['id']}/seeds",
                        json={"seeds": seeds_for(ph)})
        assert r.status_code == 409
    finally:
        session.lock.release()
    r = client.post(f"/sessions/{info['id']}/seeds",
                    json={"seeds": seeds_for(ph)})
    assert r.status_code == 200


def test_delete_session(served):
    client, tmp, _ = served
    info = make_session(client, tmp)
    assert client.delete(f"/sessions/{info['id']}").status_code == 204
    assert client.get(f"/sessions/{info['id']}").status_code == 404


def test_image_pack_mismatch_rejected(served, tmp_path):
    client, tmp, _ = served
    other = sw.Image((8, 8), np.linspace(0, 1, 64))
    sw.save_image(other, tmp_path / "other")
    resp = client.post("/sessions", json={
        "image_path": str(tmp_path / "other.json"),
        "pack_paths": [str(tmp / "pack10.rwpk")]})
    assert resp.status_code == 422
