"""Networks: identity encoder, makeup encoder, decoder with AdaIN blocks and
dual heads, patch discriminator, and checkpoint serialization.

Images cross the module boundary in [0, 1]; encoders and the discriminator
rescale to [-1, 1] internally, and the decoder's tanh head is rescaled back
to [0, 1] so mask composition happens in image space.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

CHECKPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ArchitectureSpec:
    """Hyperparameters that fully determine every parameter shape."""

    image_size: int = 256
    base_channels: int = 64
    identity_res_blocks: int = 4
    decoder_res_blocks: int = 4
    makeup_dim: int = 8
    mlp_hidden: int = 256

    @property
    def identity_channels(self) -> int:
        return 4 * self.base_channels

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ArchitectureSpec":
        return cls(**data)

    def score_map_size(self, input_size: int) -> int:
        """Spatial size of the discriminator's patch score map."""
        n = input_size
        for stride in DISC_STRIDES:
            n = (n + 2 * 1 - 4) // stride + 1
        return n


# Discriminator plan: six k4 convs, pad 1 (four strided, one unit-stride
# feature layer, one unit-stride score layer), leaky relu slope 0.2.
DISC_STRIDES = (2, 2, 2, 2, 1, 1)


def he_init(module: nn.Module):
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.Linear)):
            nn.init.kaiming_normal_(m.weight, mode="fan_in", nonlinearity="relu")
            if m.bias is not None:
                nn.init.zeros_(m.bias)


def to_tensor(pixels: np.ndarray, dtype=torch.float32) -> torch.Tensor:
    """H x W x 3 array in [0, 1] -> 1 x 3 x H x W tensor."""
    arr = np.asarray(pixels, dtype=np.float32)
    return torch.from_numpy(arr).permute(2, 0, 1).unsqueeze(0).to(dtype)


def to_image(tensor: torch.Tensor) -> np.ndarray:
    """1 x C x H x W (or C x H x W) tensor -> H x W x C float array."""
    t = tensor.detach()
    if t.dim() == 4:
        t = t[0]
    return t.permute(1, 2, 0).cpu().numpy().astype(np.float64)


def compose_with_mask(raw_face: torch.Tensor, mask: torch.Tensor, original: torch.Tensor) -> torch.Tensor:
    """Attention composition: mask * raw + (1 - mask) * original, elementwise."""
    return mask * raw_face + (1.0 - mask) * original


@dataclass
class GeneratorOutput:
    """Raw synthesized face, attention mask, and the mask-composited result."""

    raw_face: torch.Tensor  # B x 3 x H x W in [0, 1]
    mask: torch.Tensor      # B x 1 x H x W in [0, 1]
    composed: torch.Tensor  # B x 3 x H x W in [0, 1]

    def raw_image(self) -> np.ndarray:
        return to_image(self.raw_face)

    def mask_image(self) -> np.ndarray:
        return to_image(self.mask)[..., 0]

    def composed_image(self) -> np.ndarray:
        return to_image(self.composed)


class ResidualBlock(nn.Module):
    """conv-IN-relu-conv-IN plus skip; used inside the identity encoder."""

    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, 1, 1)
        self.conv2 = nn.Conv2d(channels, channels, 3, 1, 1)
        self.norm1 = nn.InstanceNorm2d(channels)
        self.norm2 = nn.InstanceNorm2d(channels)

    def forward(self, x):
        h = F.relu(self.norm1(self.conv1(x)))
        h = self.norm2(self.conv2(h))
        return x + h


class IdentityEncoder(nn.Module):
    """k7n64s1 -> k4n128s2 -> k4n256s2 with instance norm, then residual blocks.

    Output is a feature map at a quarter of the input resolution.
    """

    def __init__(self, arch: ArchitectureSpec):
        super().__init__()
        c = arch.base_channels
        self.stem = nn.Sequential(
            nn.Conv2d(3, c, 7, 1, 3), nn.InstanceNorm2d(c), nn.ReLU(inplace=True),
            nn.Conv2d(c, 2 * c, 4, 2, 1), nn.InstanceNorm2d(2 * c), nn.ReLU(inplace=True),
            nn.Conv2d(2 * c, 4 * c, 4, 2, 1), nn.InstanceNorm2d(4 * c), nn.ReLU(inplace=True),
        )
        self.blocks = nn.Sequential(*[ResidualBlock(4 * c) for _ in range(arch.identity_res_blocks)])

    def forward(self, x):
        if x.shape[-1] % 4 != 0 or x.shape[-2] % 4 != 0:
            raise ValueError(f"input spatial size {tuple(x.shape[-2:])} not divisible by 4")
        return self.blocks(self.stem(x * 2.0 - 1.0))


class MakeupEncoder(nn.Module):
    """Conv stack without any normalization, global average pool, FC to the makeup code."""

    def __init__(self, arch: ArchitectureSpec):
        super().__init__()
        c = arch.base_channels
        self.stem = nn.Sequential(
            nn.Conv2d(3, c, 7, 1, 3), nn.ReLU(inplace=True),
            nn.Conv2d(c, 2 * c, 4, 2, 1), nn.ReLU(inplace=True),
            nn.Conv2d(2 * c, 4 * c, 4, 2, 1), nn.ReLU(inplace=True),
        )
        self.fc = nn.Linear(4 * c, arch.makeup_dim)

    def forward(self, x):
        h = self.stem(x * 2.0 - 1.0)
        return self.fc(h.mean(dim=(2, 3)))


def adain(x: torch.Tensor, gamma: torch.Tensor, beta: torch.Tensor, eps: float = 1e-5):
    """Adaptive instance norm: per-channel whitening with dynamic scale/shift."""
    mean = x.mean(dim=(2, 3), keepdim=True)
    var = x.var(dim=(2, 3), keepdim=True, unbiased=False)
    return gamma * (x - mean) / torch.sqrt(var + eps) + beta


class AdaINResidualBlock(nn.Module):
    """conv-AdaIN-relu-conv-AdaIN plus skip; scale/shift arrive from the MLP."""

    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, 1, 1)
        self.conv2 = nn.Conv2d(channels, channels, 3, 1, 1)

    def forward(self, x, params):
        (g1, b1), (g2, b2) = params
        h = F.relu(adain(self.conv1(x), g1, b1))
        h = adain(self.conv2(h), g2, b2)
        return x + h


class Decoder(nn.Module):
    """AdaIN residual blocks, two upsampling stages with layer norm, dual heads.

    The MLP maps the makeup code to a distinct (gamma, beta) pair for every
    AdaIN layer. The forward pass is stateless, so a frozen instance is safe
    to share across concurrent inference calls.
    """

    def __init__(self, arch: ArchitectureSpec):
        super().__init__()
        c = arch.base_channels
        self.channels = 4 * c
        self.blocks = nn.ModuleList([AdaINResidualBlock(4 * c) for _ in range(arch.decoder_res_blocks)])
        self.n_adain = 2 * arch.decoder_res_blocks
        self.mlp = nn.Sequential(
            nn.Linear(arch.makeup_dim, arch.mlp_hidden), nn.ReLU(inplace=True),
            nn.Linear(arch.mlp_hidden, arch.mlp_hidden), nn.ReLU(inplace=True),
            nn.Linear(arch.mlp_hidden, self.n_adain * 2 * self.channels),
        )
        self.up1 = nn.Conv2d(4 * c, 2 * c, 5, 1, 2)
        self.up2 = nn.Conv2d(2 * c, c, 5, 1, 2)
        self.norm1 = nn.GroupNorm(1, 2 * c)  # layer norm over (C, H, W)
        self.norm2 = nn.GroupNorm(1, c)
        self.head_face = nn.Conv2d(c, 3, 7, 1, 3)
        self.head_mask = nn.Conv2d(c, 1, 7, 1, 3)

    def adain_params(self, makeup_code: torch.Tensor):
        """Slice the MLP output into per-layer (gamma, beta) pairs."""
        flat = self.mlp(makeup_code)
        chunks = flat.view(flat.shape[0], self.n_adain, 2, self.channels)
        return [
            (chunks[:, i, 0].unsqueeze(-1).unsqueeze(-1), chunks[:, i, 1].unsqueeze(-1).unsqueeze(-1))
            for i in range(self.n_adain)
        ]

    def forward(self, identity_code: torch.Tensor, makeup_code: torch.Tensor, original: torch.Tensor):
        if makeup_code.dim() == 1:
            makeup_code = makeup_code.unsqueeze(0)
        if identity_code.shape[-2:] != (original.shape[-2] // 4, original.shape[-1] // 4):
            raise ValueError(
                f"identity code {tuple(identity_code.shape[-2:])} incompatible with "
                f"image {tuple(original.shape[-2:])}"
            )
        params = self.adain_params(makeup_code)
        h = identity_code
        for i, block in enumerate(self.blocks):
            h = block(h, params[2 * i : 2 * i + 2])
        h = F.relu(self.norm1(self.up1(F.interpolate(h, scale_factor=2, mode="nearest"))))
        h = F.relu(self.norm2(self.up2(F.interpolate(h, scale_factor=2, mode="nearest"))))
        raw_face = (torch.tanh(self.head_face(h)) + 1.0) / 2.0
        mask = torch.sigmoid(self.head_mask(h))
        composed = compose_with_mask(raw_face, mask, original)
        return GeneratorOutput(raw_face=raw_face, mask=mask, composed=composed)


class Discriminator(nn.Module):
    """Six k4 convolutions with leaky relu producing a patch score map."""

    def __init__(self, arch: ArchitectureSpec):
        super().__init__()
        c = arch.base_channels
        widths = (c, 2 * c, 4 * c, 8 * c, 8 * c)
        layers = []
        prev = 3
        for width, stride in zip(widths, DISC_STRIDES):
            layers += [nn.Conv2d(prev, width, 4, stride, 1), nn.LeakyReLU(0.2, inplace=True)]
            prev = width
        layers.append(nn.Conv2d(prev, 1, 4, DISC_STRIDES[-1], 1))
        self.net = nn.Sequential(*layers)

    def forward(self, x):
        return self.net(x * 2.0 - 1.0)


# Mask-head bias at init: the attention mask starts near 1 ("use the
# synthesized face everywhere"), so reconstruction cannot short-circuit
# through input copying before the raw face has learned anything; the
# attention loss then carves the mask down to the related region.
MASK_HEAD_BIAS_INIT = 3.0


class MakeupTransferNet(nn.Module):
    """The four networks plus convenience forward passes."""

    def __init__(self, arch: ArchitectureSpec = None):
        super().__init__()
        self.arch = arch or ArchitectureSpec()
        self.identity_encoder = IdentityEncoder(self.arch)
        self.makeup_encoder = MakeupEncoder(self.arch)
        self.generator = Decoder(self.arch)
        self.discriminator = Discriminator(self.arch)
        he_init(self)
        nn.init.constant_(self.generator.head_mask.bias, MASK_HEAD_BIAS_INIT)

    def encode_identity(self, x: torch.Tensor) -> torch.Tensor:
        return self.identity_encoder(x)

    def encode_makeup(self, x: torch.Tensor) -> torch.Tensor:
        return self.makeup_encoder(x)

    def decode(self, identity_code, makeup_code, original) -> GeneratorOutput:
        return self.generator(identity_code, makeup_code, original)

    def discriminate(self, x: torch.Tensor) -> torch.Tensor:
        return self.discriminator(x)

    def reconstruct(self, x: torch.Tensor) -> GeneratorOutput:
        return self.decode(self.encode_identity(x), self.encode_makeup(x), x)

    def generator_parameters(self):
        """Everything updated by the generator-side objective."""
        yield from self.identity_encoder.parameters()
        yield from self.makeup_encoder.parameters()
        yield from self.generator.parameters()


def save_checkpoint(path, model: MakeupTransferNet, extra: dict = None):
    """Versioned checkpoint: architecture descriptor plus named parameter tensors."""
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "architecture": model.arch.to_dict(),
        "parameters": {
            "identity_encoder": model.identity_encoder.state_dict(),
            "makeup_encoder": model.makeup_encoder.state_dict(),
            "generator": model.generator.state_dict(),
            "discriminator": model.discriminator.state_dict(),
        },
        "extra": extra or {},
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)


def load_checkpoint(path):
    """Load a checkpoint; returns (model, extra payload)."""
    payload = torch.load(path, map_location="cpu", weights_only=False)
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format version: {version}")
    model = MakeupTransferNet(ArchitectureSpec.from_dict(payload["architecture"]))
    model.identity_encoder.load_state_dict(payload["parameters"]["identity_encoder"])
    model.makeup_encoder.load_state_dict(payload["parameters"]["makeup_encoder"])
    model.generator.load_state_dict(payload["parameters"]["generator"])
    model.discriminator.load_state_dict(payload["parameters"]["discriminator"])
    return model, payload.get("extra", {})
