"""HTTP inference API bridging trained checkpoints to the studio UI and
scripted clients.

All result images are returned as base64 PNG (lossless), so byte equality
between equivalent requests is testable. Hybrid weights are renormalized at
this boundary and echoed back; the core transfer operations keep their
strict sum-to-1 contract.
"""

from __future__ import annotations

import base64
import hashlib
import io
import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
import torch
from fastapi import FastAPI, HTTPException, Request, UploadFile
from PIL import Image
from pydantic import BaseModel

from . import nets, transfer
from .nets import MakeupTransferNet

DEFAULT_MAX_UPLOAD_BYTES = 8 * 1024 * 1024
DEFAULT_CACHE_CAPACITY = 64


@dataclass
class UploadRecord:
    pixels: np.ndarray
    identity_code: torch.Tensor
    makeup_code: torch.Tensor


class SessionStore:
    """LRU cache of uploads with their encoded identity/makeup codes."""

    def __init__(self, capacity: int = DEFAULT_CACHE_CAPACITY):
        self.capacity = capacity
        self._lock = threading.Lock()
        self._records: OrderedDict = OrderedDict()

    def put(self, image_id: str, record: UploadRecord):
        with self._lock:
            self._records[image_id] = record
            self._records.move_to_end(image_id)
            while len(self._records) > self.capacity:
                self._records.popitem(last=False)

    def get(self, image_id: str) -> UploadRecord:
        with self._lock:
            record = self._records.get(image_id)
            if record is not None:
                self._records.move_to_end(image_id)
            return record

    def __len__(self):
        return len(self._records)


class ModelBox:
    """Holder whose swap is atomic; readers grab one reference per request."""

    def __init__(self, model: MakeupTransferNet = None, tag: str = ""):
        self._lock = threading.Lock()
        self._model = model
        self._tag = tag
        if model is not None:
            model.eval()

    def swap(self, model: MakeupTransferNet, tag: str = ""):
        model.eval()
        with self._lock:
            self._model = model
            self._tag = tag

    def get(self):
        with self._lock:
            return self._model, self._tag


class TransferRequest(BaseModel):
    source_id: str
    mode: str
    reference_id: str = None
    reference_ids: list = None
    alpha: float = None
    weights: list = None
    seed: int = None
    code: list = None


def encode_png(pixels: np.ndarray) -> bytes:
    arr = np.clip(np.asarray(pixels, dtype=np.float64), 0.0, 1.0)
    if arr.ndim == 2:
        image = Image.fromarray((arr * 255.0 + 0.5).astype(np.uint8), mode="L")
    else:
        image = Image.fromarray((arr * 255.0 + 0.5).astype(np.uint8))
    buffer = io.BytesIO()
    image.save(buffer, format="PNG")
    return buffer.getvalue()


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def create_app(
    model: MakeupTransferNet = None,
    checkpoint_tag: str = "",
    max_upload_bytes: int = DEFAULT_MAX_UPLOAD_BYTES,
    cache_capacity: int = DEFAULT_CACHE_CAPACITY,
) -> FastAPI:
    app = FastAPI(title="makeuptransfer inference service")
    app.state.store = SessionStore(cache_capacity)
    app.state.model_box = ModelBox(model, checkpoint_tag)
    app.state.max_upload_bytes = max_upload_bytes

    def require_model() -> MakeupTransferNet:
        loaded, _ = app.state.model_box.get()
        if loaded is None:
            raise HTTPException(status_code=503, detail="model not loaded")
        return loaded

    def require_record(image_id: str) -> UploadRecord:
        record = app.state.store.get(image_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"unknown image id '{image_id}'")
        return record

    @app.get("/health")
    def health():
        loaded, tag = app.state.model_box.get()
        return {"status": "ok", "model_loaded": loaded is not None, "checkpoint": tag}

    @app.get("/model")
    def model_info():
        loaded, tag = app.state.model_box.get()
        if loaded is None:
            raise HTTPException(status_code=503, detail="model not loaded")
        return {
            "format_version": nets.CHECKPOINT_FORMAT_VERSION,
            "architecture": loaded.arch.to_dict(),
            "checkpoint": tag,
        }

    @app.post("/images")
    async def upload_image(file: UploadFile, request: Request):
        net = require_model()
        data = await file.read()
        if len(data) > app.state.max_upload_bytes:
            raise HTTPException(status_code=413, detail="upload exceeds size limit")
        try:
            with Image.open(io.BytesIO(data)) as im:
                pixels = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
        except Exception:
            raise HTTPException(status_code=415, detail="payload is not a decodable image")
        if pixels.shape[0] % 4 or pixels.shape[1] % 4:
            raise HTTPException(status_code=422, detail="image size must be divisible by 4")
        image_id = hashlib.sha256(pixels.tobytes()).hexdigest()[:16]
        with torch.no_grad():
            t, _ = transfer._prepare(net, pixels)
            record = UploadRecord(
                pixels=pixels,
                identity_code=net.encode_identity(t),
                makeup_code=net.encode_makeup(t),
            )
        app.state.store.put(image_id, record)
        return {"image_id": image_id, "makeup_code": record.makeup_code.numpy().ravel().tolist()}

    @app.post("/transfer")
    def run_transfer(req: TransferRequest):
        net = require_model()
        source = require_record(req.source_id)
        x_t = nets.to_tensor(source.pixels)
        size = net.arch.image_size
        if x_t.shape[-2:] != (size, size):
            x_t = torch.nn.functional.interpolate(
                x_t, size=(size, size), mode="bilinear", align_corners=False
            ).clamp(0, 1)
        params: dict = {"mode": req.mode}

        def decode(code: torch.Tensor):
            with torch.no_grad():
                out = net.decode(source.identity_code, code, x_t)
                return transfer._restore(out, source.pixels.shape[:2])

        if req.mode == "reconstruct":
            out = decode(source.makeup_code)
        elif req.mode == "pairwise":
            if not req.reference_id:
                raise HTTPException(status_code=422, detail="pairwise needs reference_id")
            reference = require_record(req.reference_id)
            params["reference_id"] = req.reference_id
            out = decode(reference.makeup_code)
        elif req.mode == "interpolated":
            if not req.reference_id or req.alpha is None:
                raise HTTPException(status_code=422, detail="interpolated needs reference_id and alpha")
            if not 0.0 <= req.alpha <= 1.0:
                raise HTTPException(status_code=422, detail=f"alpha={req.alpha} outside [0, 1]")
            reference = require_record(req.reference_id)
            params.update(reference_id=req.reference_id, alpha=req.alpha)
            code = (1.0 - req.alpha) * source.makeup_code + req.alpha * reference.makeup_code
            out = decode(code)
        elif req.mode == "hybrid":
            if not req.reference_ids or req.weights is None:
                raise HTTPException(status_code=422, detail="hybrid needs reference_ids and weights")
            if len(req.reference_ids) != len(req.weights):
                raise HTTPException(status_code=422, detail="weights and reference_ids differ in length")
            weights = [float(w) for w in req.weights]
            if any(w < 0 for w in weights) or sum(weights) <= 0:
                raise HTTPException(status_code=422, detail="weights must be nonnegative with positive sum")
            total = sum(weights)
            weights = [w / total for w in weights]  # boundary renormalization, echoed below
            references = [require_record(rid) for rid in req.reference_ids]
            params.update(reference_ids=list(req.reference_ids), weights=weights)
            code = sum(w * r.makeup_code for w, r in zip(weights, references))
            out = decode(code)
        elif req.mode == "multimodal":
            if req.code is not None:
                code = torch.as_tensor(req.code, dtype=torch.float32).reshape(1, -1)
                if code.shape[1] != net.arch.makeup_dim:
                    raise HTTPException(
                        status_code=422, detail=f"code must have {net.arch.makeup_dim} entries"
                    )
                params["code"] = [float(v) for v in code.ravel()]
            else:
                seed = 0 if req.seed is None else int(req.seed)
                rng = torch.Generator().manual_seed(seed)
                code = torch.randn(1, net.arch.makeup_dim, generator=rng)
                params.update(seed=seed, code=[float(v) for v in code.ravel()])
            out = decode(code)
        else:
            raise HTTPException(status_code=422, detail=f"unknown mode '{req.mode}'")

        composed = out.composed_image()
        return {
            "source_id": req.source_id,
            "params": params,
            "result_png": _b64(encode_png(composed)),
            "mask_png": _b64(encode_png(out.mask_image())),
            "residual_png": _b64(encode_png(transfer.residual(source.pixels, composed))),
        }

    return app


def load_app_from_checkpoint(
    checkpoint_path,
    max_upload_bytes: int = DEFAULT_MAX_UPLOAD_BYTES,
    cache_capacity: int = DEFAULT_CACHE_CAPACITY,
) -> FastAPI:
    model, _ = nets.load_checkpoint(checkpoint_path)
    return create_app(
        model,
        checkpoint_tag=str(checkpoint_path),
        max_upload_bytes=max_upload_bytes,
        cache_capacity=cache_capacity,
    )
