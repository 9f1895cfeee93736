"""Inference scenarios: pair-wise, interpolated, hybrid, and multi-modal
transfer, plus reconstruction and residual images.

Inputs of any size divisible by 4 are accepted; sizes other than the
model's training size are resized in, processed, and resized back, which is
documented as lossy (the bitwise composition identities hold at native
size).
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F

from .dataio import FaceImage
from .nets import GeneratorOutput, MakeupTransferNet, to_tensor


def as_pixels(image) -> np.ndarray:
    if isinstance(image, FaceImage):
        return image.pixels
    return np.asarray(image, dtype=np.float64)


def _prepare(model: MakeupTransferNet, image) -> tuple:
    """Returns (tensor at model size, original (H, W))."""
    pixels = as_pixels(image)
    h, w = pixels.shape[:2]
    if h % 4 or w % 4:
        raise ValueError(f"input size {h}x{w} must be divisible by 4")
    t = to_tensor(pixels)
    size = model.arch.image_size
    if (h, w) != (size, size):
        t = F.interpolate(t, size=(size, size), mode="bilinear", align_corners=False).clamp(0, 1)
    return t, (h, w)


def _restore(out: GeneratorOutput, shape) -> GeneratorOutput:
    h, w = shape
    if out.composed.shape[-2:] == (h, w):
        return out
    resize = lambda t: F.interpolate(t, size=(h, w), mode="bilinear", align_corners=False).clamp(0, 1)
    return GeneratorOutput(raw_face=resize(out.raw_face), mask=resize(out.mask), composed=resize(out.composed))


@torch.no_grad()
def _decode(model, x_t, makeup_code, shape) -> GeneratorOutput:
    out = model.decode(model.encode_identity(x_t), makeup_code, x_t)
    return _restore(out, shape)


@torch.no_grad()
def reconstruct(model: MakeupTransferNet, x) -> GeneratorOutput:
    """Encode then decode x with its own makeup code."""
    model.eval()
    x_t, shape = _prepare(model, x)
    return _decode(model, x_t, model.encode_makeup(x_t), shape)


@torch.no_grad()
def pairwise(model: MakeupTransferNet, x, y) -> GeneratorOutput:
    """Render x with y's makeup code; both images may be makeup or non-makeup."""
    model.eval()
    x_t, shape = _prepare(model, x)
    y_t, _ = _prepare(model, y)
    return _decode(model, x_t, model.encode_makeup(y_t), shape)


@torch.no_grad()
def interpolated(model: MakeupTransferNet, x, y, alpha: float, extrapolate: bool = False) -> GeneratorOutput:
    """Blend x's and y's makeup codes: (1 - alpha) * m_x + alpha * m_y."""
    if not extrapolate and not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha={alpha} outside [0, 1]; pass extrapolate=True to allow")
    model.eval()
    x_t, shape = _prepare(model, x)
    y_t, _ = _prepare(model, y)
    m_x = model.encode_makeup(x_t)
    m_y = model.encode_makeup(y_t)
    return _decode(model, x_t, (1.0 - alpha) * m_x + alpha * m_y, shape)


@torch.no_grad()
def hybrid(model: MakeupTransferNet, x, references, weights) -> GeneratorOutput:
    """Blend K reference makeup codes with nonnegative weights summing to 1.

    The core never renormalizes; callers wanting that convenience must do it
    themselves before calling.
    """
    references = list(references)
    weights = [float(w) for w in weights]
    if len(references) < 1:
        raise ValueError("hybrid transfer needs at least one reference")
    if len(weights) != len(references):
        raise ValueError(f"{len(weights)} weights for {len(references)} references")
    if any(w < 0 for w in weights):
        raise ValueError("hybrid weights must be nonnegative")
    if abs(sum(weights) - 1.0) > 1e-6:
        raise ValueError(f"hybrid weights must sum to 1 (got {sum(weights)})")
    model.eval()
    x_t, shape = _prepare(model, x)
    code = None
    for weight, ref in zip(weights, references):
        ref_t, _ = _prepare(model, ref)
        term = weight * model.encode_makeup(ref_t)
        code = term if code is None else code + term
    return _decode(model, x_t, code, shape)


@torch.no_grad()
def sample_multimodal(model: MakeupTransferNet, x, n: int, rng) -> list:
    """Decode x with n makeup codes drawn from the standard normal prior.

    rng is a torch.Generator or an integer seed; the same seed reproduces
    the same outputs.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not isinstance(rng, torch.Generator):
        seed = int(rng)
        rng = torch.Generator().manual_seed(seed)
    model.eval()
    x_t, shape = _prepare(model, x)
    i_x = model.encode_identity(x_t)
    outputs = []
    for _ in range(n):
        code = torch.randn(1, model.arch.makeup_dim, generator=rng)
        outputs.append(_restore(model.decode(i_x, code, x_t), shape))
    return outputs


@torch.no_grad()
def decode_with_code(model: MakeupTransferNet, x, makeup_code) -> GeneratorOutput:
    """Decode x with an explicit makeup code (list, array, or tensor)."""
    model.eval()
    x_t, shape = _prepare(model, x)
    code = torch.as_tensor(makeup_code, dtype=torch.float32).reshape(1, -1)
    if code.shape[1] != model.arch.makeup_dim:
        raise ValueError(f"makeup code must have {model.arch.makeup_dim} entries")
    return _decode(model, x_t, code, shape)


# The four pair-wise cases: the result keeps x's identity and takes y's
# makeup status.
PAIRWISE_CASES = {
    (False, False): "none",
    (False, True): "add makeup",
    (True, False): "remove makeup",
    (True, True): "swap makeup",
}


def pairwise_case(x: FaceImage, y: FaceImage):
    """Classify a pair-wise transfer; returns (objective, result_has_makeup)."""
    return PAIRWISE_CASES[(x.has_makeup, y.has_makeup)], y.has_makeup


def residual(x, x_s) -> np.ndarray:
    """Elementwise absolute difference, for visualizing what a transfer changed."""
    a = as_pixels(x)
    b = as_pixels(x_s)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return np.abs(a - b)


@torch.no_grad()
def interpolate_identity(model: MakeupTransferNet, x, y, alpha: float) -> GeneratorOutput:
    """Face interpolation: blend identity and makeup codes jointly.

    Library-level only; exposed for experimentation rather than through the
    CLI, and composition still runs against x.
    """
    model.eval()
    x_t, shape = _prepare(model, x)
    y_t, _ = _prepare(model, y)
    i_mix = (1.0 - alpha) * model.encode_identity(x_t) + alpha * model.encode_identity(y_t)
    m_mix = (1.0 - alpha) * model.encode_makeup(x_t) + alpha * model.encode_makeup(y_t)
    return _restore(model.decode(i_mix, m_mix, x_t), shape)
