import base64
import io

import numpy as np
import pytest
import torch
from fastapi.testclient import TestClient
from PIL import Image

from makeuptransfer.nets import ArchitectureSpec, MakeupTransferNet
from makeuptransfer.service import create_app


def png_bytes(seed, size=48):
    rng = np.random.default_rng(seed)
    arr = (rng.random((size, size, 3)) * 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def upload(client, seed, size=48):
    response = client.post("/images", files={"file": ("face.png", png_bytes(seed, size), "image/png")})
    assert response.status_code == 200, response.text
    return response.json()


@pytest.fixture()
def client(tiny_model):
    app = create_app(tiny_model, checkpoint_tag="test-checkpoint", max_upload_bytes=200_000)
    return TestClient(app)


@pytest.fixture()
def bare_client():
    return TestClient(create_app())


class TestHealthAndModel:
    def test_health_always_ok(self, bare_client, client):
        assert bare_client.get("/health").json()["model_loaded"] is False
        body = client.get("/health").json()
        assert body["status"] == "ok" and body["model_loaded"] is True

    def test_model_info_requires_load(self, bare_client):
        assert bare_client.get("/model").status_code == 503

    def test_model_descriptor_roundtrips(self, client, tiny_model):
        body = client.get("/model").json()
        assert ArchitectureSpec.from_dict(body["architecture"]) == tiny_model.arch
        assert body["checkpoint"] == "test-checkpoint"


class TestUpload:
    def test_valid_upload_returns_code(self, client):
        body = upload(client, 0)
        assert len(body["makeup_code"]) == 8
        assert all(np.isfinite(body["makeup_code"]))

    def test_same_image_same_code(self, client):
        a = upload(client, 1)
        b = upload(client, 1)
        assert a["image_id"] == b["image_id"]
        assert a["makeup_code"] == b["makeup_code"]

    def test_corrupt_payload_415(self, client):
        response = client.post("/images", files={"file": ("x.png", b"garbage", "image/png")})
        assert response.status_code == 415

    def test_oversize_413(self, tiny_model):
        app = create_app(tiny_model, max_upload_bytes=64)
        response = TestClient(app).post(
            "/images", files={"file": ("x.png", png_bytes(0), "image/png")}
        )
        assert response.status_code == 413

    def test_upload_without_model_503(self, bare_client):
        response = bare_client.post("/images", files={"file": ("x.png", png_bytes(0), "image/png")})
        assert response.status_code == 503

    def test_cached_codes_match_reencoding(self, client, tiny_model):
        from makeuptransfer import transfer

        body = upload(client, 2)
        app_store = client.app.state.store
        record = app_store.get(body["image_id"])
        with torch.no_grad():
            t, _ = transfer._prepare(tiny_model, record.pixels)
            assert torch.equal(record.makeup_code, tiny_model.encode_makeup(t))
            assert torch.equal(record.identity_code, tiny_model.encode_identity(t))


class TestTransferEndpoint:
    def test_reconstruct_mode(self, client):
        source = upload(client, 3)
        response = client.post("/transfer", json={"source_id": source["image_id"], "mode": "reconstruct"})
        assert response.status_code == 200
        body = response.json()
        assert set(body) >= {"params", "result_png", "mask_png", "residual_png"}

    def test_unknown_id_404(self, client):
        response = client.post("/transfer", json={"source_id": "nope", "mode": "reconstruct"})
        assert response.status_code == 404

    def test_alpha_zero_matches_reconstruction_bytes(self, client):
        source = upload(client, 4)
        reference = upload(client, 5)
        recon = client.post("/transfer", json={"source_id": source["image_id"], "mode": "reconstruct"})
        interp = client.post(
            "/transfer",
            json={
                "source_id": source["image_id"],
                "mode": "interpolated",
                "reference_id": reference["image_id"],
                "alpha": 0.0,
            },
        )
        assert recon.json()["result_png"] == interp.json()["result_png"]

    def test_hybrid_single_matches_pairwise_bytes(self, client):
        source = upload(client, 6)
        reference = upload(client, 7)
        pair = client.post(
            "/transfer",
            json={
                "source_id": source["image_id"],
                "mode": "pairwise",
                "reference_id": reference["image_id"],
            },
        )
        hybrid = client.post(
            "/transfer",
            json={
                "source_id": source["image_id"],
                "mode": "hybrid",
                "reference_ids": [reference["image_id"]],
                "weights": [1.0],
            },
        )
        assert pair.json()["result_png"] == hybrid.json()["result_png"]

    def test_multimodal_seed_reproducible_bytes(self, client):
        source = upload(client, 8)
        request = {"source_id": source["image_id"], "mode": "multimodal", "seed": 42}
        a = client.post("/transfer", json=request).json()
        b = client.post("/transfer", json=request).json()
        assert a["result_png"] == b["result_png"]
        assert a["params"]["code"] == b["params"]["code"]

    def test_alpha_out_of_range_422(self, client):
        source = upload(client, 9)
        reference = upload(client, 10)
        response = client.post(
            "/transfer",
            json={
                "source_id": source["image_id"],
                "mode": "interpolated",
                "reference_id": reference["image_id"],
                "alpha": 1.5,
            },
        )
        assert response.status_code == 422

    def test_hybrid_weights_renormalized_and_echoed(self, client):
        source = upload(client, 11)
        r1 = upload(client, 12)
        r2 = upload(client, 13)
        response = client.post(
            "/transfer",
            json={
                "source_id": source["image_id"],
                "mode": "hybrid",
                "reference_ids": [r1["image_id"], r2["image_id"]],
                "weights": [2.0, 6.0],
            },
        )
        body = response.json()
        assert body["params"]["weights"] == [0.25, 0.75]
        normalized = client.post(
            "/transfer",
            json={
                "source_id": source["image_id"],
                "mode": "hybrid",
                "reference_ids": [r1["image_id"], r2["image_id"]],
                "weights": [0.25, 0.75],
            },
        )
        assert body["result_png"] == normalized.json()["result_png"]

    def test_negative_weights_422(self, client):
        source = upload(client, 14)
        r1 = upload(client, 15)
        response = client.post(
            "/transfer",
            json={
                "source_id": source["image_id"],
                "mode": "hybrid",
                "reference_ids": [r1["image_id"]],
                "weights": [-1.0],
            },
        )
        assert response.status_code == 422

    def test_explicit_code(self, client):
        source = upload(client, 16)
        response = client.post(
            "/transfer",
            json={"source_id": source["image_id"], "mode": "multimodal", "code": [0.0] * 8},
        )
        assert response.status_code == 200
        assert response.json()["params"]["code"] == [0.0] * 8

    def test_identical_requests_byte_identical(self, client):
        source = upload(client, 17)
        reference = upload(client, 18)
        request = {
            "source_id": source["image_id"],
            "mode": "pairwise",
            "reference_id": reference["image_id"],
        }
        a = client.post("/transfer", json=request).json()
        b = client.post("/transfer", json=request).json()
        assert a == b

    def test_result_png_decodable_and_lossless_format(self, client):
        source = upload(client, 19)
        body = client.post(
            "/transfer", json={"source_id": source["image_id"], "mode": "reconstruct"}
        ).json()
        raw = base64.b64decode(body["result_png"])
        with Image.open(io.BytesIO(raw)) as im:
            assert im.format == "PNG"
            assert im.size == (48, 48)


class TestCheckpointLoading:
    def test_app_from_checkpoint_file(self, tiny_model, tmp_path):
        from makeuptransfer import nets
        from makeuptransfer.service import load_app_from_checkpoint

        path = tmp_path / "model.pt"
        nets.save_checkpoint(path, tiny_model)
        client = TestClient(load_app_from_checkpoint(path))
        body = client.get("/model").json()
        assert body["checkpoint"] == str(path)
        assert upload(client, 50)["makeup_code"] == upload(client, 50)["makeup_code"]


class TestStoreAndSwap:
    def test_lru_eviction_404(self, tiny_model):
        app = create_app(tiny_model, cache_capacity=2)
        client = TestClient(app)
        first = upload(client, 20)
        upload(client, 21)
        upload(client, 22)  # evicts the first
        response = client.post(
            "/transfer", json={"source_id": first["image_id"], "mode": "reconstruct"}
        )
        assert response.status_code == 404

    def test_model_swap_atomic_interface(self, client, tiny_arch):
        torch.manual_seed(777)
        other = MakeupTransferNet(tiny_arch)
        client.app.state.model_box.swap(other, "v2")
        assert client.get("/model").json()["checkpoint"] == "v2"
        source = upload(client, 23)
        assert client.post(
            "/transfer", json={"source_id": source["image_id"], "mode": "reconstruct"}
        ).status_code == 200
