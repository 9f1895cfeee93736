"""Training objectives: reconstruction, perceptual, makeup (region-wise),
code reconstruction, attention, LSGAN adversarial, KL, and total variation.

Norm conventions: L1 terms are mean absolute difference; L2 terms are
root-mean-square over the relevant elements, so every weight stays
resolution-independent. Empty cosmetic regions contribute exactly zero.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn

from .dataio import CosmeticRegionSet


@dataclass
class LossWeights:
    """Per-term weights; defaults follow the training recipe."""

    rec: float = 1.0
    per: float = 1e-4
    face: float = 50.0
    brow: float = 50.0
    eye: float = 50.0
    lip: float = 50.0
    identity: float = 1.0
    makeup: float = 1.0
    attention: float = 10.0
    kl: float = 0.01
    tv: float = 1e-4

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"loss weight '{name}' must be finite and >= 0, got {value}")

    def region_weight(self, region: str) -> float:
        return {"face": self.face, "brow": self.brow, "eye": self.eye, "lip": self.lip}[region]


class FeatureExtractor:
    """A frozen convolutional feature network tagged with its layer name."""

    def __init__(self, module: nn.Module, layer: str, preprocess=None):
        module.eval()
        for p in module.parameters():
            p.requires_grad_(False)
        self.module = module
        self.layer = layer
        self.preprocess = preprocess

    def __call__(self, images: torch.Tensor) -> torch.Tensor:
        x = images if self.preprocess is None else self.preprocess(images)
        return self.module(x)

    def to(self, dtype):
        self.module = self.module.to(dtype)
        return self


_VGG_HINT = (
    "pretrained VGG-16 weights are unavailable; pass weights_path= pointing to a "
    "torchvision vgg16 state dict (e.g. vgg16-397923af.pth from the torchvision "
    "model zoo), or install torchvision with download access"
)


def vgg16_relu4_1(weights_path=None) -> FeatureExtractor:
    """Production perceptual extractor: VGG-16 truncated at relu4_1."""
    try:
        from torchvision.models import vgg16
    except ImportError as exc:
        raise RuntimeError(_VGG_HINT) from exc
    if weights_path is not None:
        net = vgg16(weights=None)
        state = torch.load(weights_path, map_location="cpu", weights_only=True)
        net.load_state_dict(state)
    else:
        try:
            from torchvision.models import VGG16_Weights

            net = vgg16(weights=VGG16_Weights.IMAGENET1K_V1)
        except Exception as exc:
            raise RuntimeError(_VGG_HINT) from exc
    features = net.features[:19]  # through relu4_1
    mean = torch.tensor([0.485, 0.456, 0.406]).view(1, 3, 1, 1)
    std = torch.tensor([0.229, 0.224, 0.225]).view(1, 3, 1, 1)
    preprocess = lambda x: (x - mean.to(x.dtype)) / std.to(x.dtype)
    return FeatureExtractor(features, "relu4_1", preprocess)


def random_feature_extractor(seed: int = 0, channels=(8, 16)) -> FeatureExtractor:
    """Seeded random-weight stand-in for tests and desk-scale runs.

    Weights are drawn in a documented order so an independent implementation
    can rebuild them: w1 ~ N(0,1)/sqrt(27) with shape (c1,3,3,3), then
    w2 ~ N(0,1)/sqrt(9*c1) with shape (c2,c1,3,3); both convs are k3s1p1
    with zero bias, relu after each.
    """
    c1, c2 = channels
    rng = np.random.default_rng(seed)
    w1 = rng.standard_normal((c1, 3, 3, 3)) / math.sqrt(27.0)
    w2 = rng.standard_normal((c2, c1, 3, 3)) / math.sqrt(9.0 * c1)
    conv1 = nn.Conv2d(3, c1, 3, 1, 1, bias=False)
    conv2 = nn.Conv2d(c1, c2, 3, 1, 1, bias=False)
    with torch.no_grad():
        conv1.weight.copy_(torch.from_numpy(w1))
        conv2.weight.copy_(torch.from_numpy(w2))
    net = nn.Sequential(conv1, nn.ReLU(), conv2, nn.ReLU())
    return FeatureExtractor(net, f"random_seed{seed}")


def _check_same_shape(a: torch.Tensor, b: torch.Tensor, what: str):
    if a.shape != b.shape:
        raise ValueError(f"{what}: shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")


def reconstruction_loss(x: torch.Tensor, x_r: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference between an image and its reconstruction."""
    _check_same_shape(x, x_r, "reconstruction_loss")
    return (x - x_r).abs().mean()


def perceptual_loss(x: torch.Tensor, x_s: torch.Tensor, extractor: FeatureExtractor) -> torch.Tensor:
    """RMS distance between fixed-network features of the two images."""
    if extractor is None:
        raise RuntimeError(_VGG_HINT)
    fx = extractor(x)
    fs = extractor(x_s)
    return ((fx - fs) ** 2).mean().sqrt()


def _region_select(t: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    return t[..., mask]  # B x 3 x N


def makeup_loss(
    x_s: torch.Tensor,
    x_y: torch.Tensor,
    regions: CosmeticRegionSet,
    weights: LossWeights,
) -> torch.Tensor:
    """Weighted per-region RMS color distance against the matched ground truth."""
    _check_same_shape(x_s, x_y, "makeup_loss")
    total = x_s.new_zeros(())
    for name, mask in regions.items():
        sel = torch.from_numpy(np.ascontiguousarray(mask.astype(bool)))
        if not bool(sel.any()):
            continue
        diff = _region_select(x_s, sel) - _region_select(x_y, sel)
        total = total + weights.region_weight(name) * (diff**2).mean().sqrt()
    return total


def imr_loss(
    i_x: torch.Tensor,
    i_x_s: torch.Tensor,
    m_y: torch.Tensor,
    m_x_s: torch.Tensor,
    weights: LossWeights,
) -> torch.Tensor:
    """Code round-trip loss: identity and makeup codes survive decode-encode."""
    _check_same_shape(i_x, i_x_s, "imr_loss identity codes")
    _check_same_shape(m_y, m_x_s, "imr_loss makeup codes")
    identity_term = (i_x - i_x_s).abs().mean()
    makeup_term = (m_y - m_x_s).abs().mean()
    return weights.identity * identity_term + weights.makeup * makeup_term


def attention_loss(mask: torch.Tensor, related: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference between the predicted mask and its ground truth."""
    _check_same_shape(mask, related, "attention_loss")
    return (mask - related).abs().mean()


def adversarial_loss_d(real_scores, fake_scores_s, fake_scores_f) -> torch.Tensor:
    """LSGAN discriminator objective: real to 1, both fakes to 0."""
    return (
        ((real_scores - 1.0) ** 2).mean()
        + (fake_scores_s**2).mean()
        + (fake_scores_f**2).mean()
    )


def adversarial_loss_g(fake_scores_s, fake_scores_f) -> torch.Tensor:
    """LSGAN generator objective: both fakes to 1."""
    return ((fake_scores_s - 1.0) ** 2).mean() + ((fake_scores_f - 1.0) ** 2).mean()


def kl_loss(m_x: torch.Tensor, m_y: torch.Tensor) -> torch.Tensor:
    """Penalty pulling makeup codes toward the standard normal prior.

    Each code is read as the mean of a unit-variance Gaussian, which reduces
    the divergence to half its squared norm (additive constant dropped).
    """
    half_sq = lambda m: 0.5 * (m**2).sum(dim=-1).mean()
    return half_sq(m_x) + half_sq(m_y)


def tv_loss(mask: torch.Tensor) -> torch.Tensor:
    """Smoothness penalty: mean absolute vertical plus mean absolute horizontal step."""
    dv = (mask[..., 1:, :] - mask[..., :-1, :]).abs()
    dh = (mask[..., :, 1:] - mask[..., :, :-1]).abs()
    total = mask.new_zeros(())
    if dv.numel():
        total = total + dv.mean()
    if dh.numel():
        total = total + dh.mean()
    return total


def total_losses(
    *,
    x,
    x_r,
    x_s,
    x_y,
    regions,
    i_x,
    i_x_s,
    m_x,
    m_y,
    m_x_s,
    mask,
    related,
    real_scores,
    fake_scores_s,
    fake_scores_f,
    extractor,
    weights: LossWeights,
):
    """Assemble the full generator and discriminator objectives.

    Returns (loss_g, loss_d, terms) where terms maps the documented field
    names (adv_g, adv_d, rec, per, mak, imr, a, kl, tv) to scalar tensors.
    The per-region and code-term weights already live inside mak and imr.
    """
    terms = {
        "adv_g": adversarial_loss_g(fake_scores_s, fake_scores_f),
        "adv_d": adversarial_loss_d(real_scores, fake_scores_s, fake_scores_f),
        "rec": reconstruction_loss(x, x_r),
        "per": perceptual_loss(x, x_s, extractor) if weights.per > 0 else x.new_zeros(()),
        "mak": makeup_loss(x_s, x_y, regions, weights),
        "imr": imr_loss(i_x, i_x_s, m_y, m_x_s, weights),
        "a": attention_loss(mask, related),
        "kl": kl_loss(m_x, m_y),
        "tv": tv_loss(mask),
    }
    loss_g = (
        terms["adv_g"]
        + weights.rec * terms["rec"]
        + weights.per * terms["per"]
        + terms["mak"]
        + terms["imr"]
        + weights.attention * terms["a"]
        + weights.kl * terms["kl"]
        + weights.tv * terms["tv"]
    )
    loss_d = terms["adv_d"]
    return loss_g, loss_d, terms
