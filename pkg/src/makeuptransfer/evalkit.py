"""Reconstruction metrics (MSE / PSNR / SSIM), the benchmark harness,
makeup-code export, and per-dimension code sweeps.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import convolve2d

from .nets import GeneratorOutput

PSNR_CAP = 100.0  # returned when mse == 0

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _as_array(image) -> np.ndarray:
    if isinstance(image, GeneratorOutput):
        return image.composed_image()
    pixels = getattr(image, "pixels", image)
    return np.asarray(pixels, dtype=np.float64)


def mse(a, b) -> float:
    a, b = _as_array(a), _as_array(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def psnr_from_mse(value: float, peak: float = 1.0, cap: float = PSNR_CAP) -> float:
    if value < 0:
        raise ValueError(f"mse must be nonnegative, got {value}")
    if value == 0:
        return cap
    return min(10.0 * math.log10(peak * peak / value), cap)


def psnr(a, b, peak: float = 1.0) -> float:
    return psnr_from_mse(mse(a, b), peak)


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    half = (size - 1) / 2
    coords = np.arange(size) - half
    g = np.exp(-(coords**2) / (2 * sigma * sigma))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def _grayscale(a: np.ndarray) -> np.ndarray:
    return a.mean(axis=2) if a.ndim == 3 else a


def ssim(a, b, peak: float = 1.0) -> float:
    """Windowed SSIM on channel-mean grayscale.

    11x11 Gaussian window (sigma 1.5), k1=0.01, k2=0.03; the local-statistics
    maps only use fully valid windows. Images smaller than the window are an
    error.
    """
    a, b = _grayscale(_as_array(a)), _grayscale(_as_array(b))
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"image {a.shape} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    window = _gaussian_window()
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2
    mu_a = convolve2d(a, window, mode="valid")
    mu_b = convolve2d(b, window, mode="valid")
    var_a = convolve2d(a * a, window, mode="valid") - mu_a * mu_a
    var_b = convolve2d(b * b, window, mode="valid") - mu_b * mu_b
    cov = convolve2d(a * b, window, mode="valid") - mu_a * mu_b
    score = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    )
    return float(score.mean())


@dataclass
class MetricRow:
    image_id: str
    mse: float
    psnr: float
    ssim: float


@dataclass
class ReconstructionReport:
    """Per-image metrics plus their means (metrics first, averaged after)."""

    rows: list = field(default_factory=list)

    @property
    def mean_mse(self) -> float:
        return float(np.mean([r.mse for r in self.rows]))

    @property
    def mean_psnr(self) -> float:
        return float(np.mean([r.psnr for r in self.rows]))

    @property
    def mean_ssim(self) -> float:
        return float(np.mean([r.ssim for r in self.rows]))

    def as_records(self) -> list:
        return [vars(r).copy() for r in self.rows]

    def table(self) -> str:
        lines = [f"{'image':24s} {'mse':>10s} {'psnr':>8s} {'ssim':>8s}"]
        for r in self.rows:
            lines.append(f"{r.image_id:24s} {r.mse:10.6f} {r.psnr:8.3f} {r.ssim:8.4f}")
        lines.append(
            f"{'mean':24s} {self.mean_mse:10.6f} {self.mean_psnr:8.3f} {self.mean_ssim:8.4f}"
        )
        return "\n".join(lines)


def reconstruction_benchmark(model, pairs) -> ReconstructionReport:
    """Reconstruct both sides of every (x, y) pair and report per-image metrics.

    ``model`` is anything with a ``reconstruct(image)`` method or a plain
    callable image -> image; PSNR and SSIM are computed per image and then
    averaged, never from the averaged MSE.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("pair list is empty")
    fn = model.reconstruct if hasattr(model, "reconstruct") else model
    report = ReconstructionReport()
    for k, (x, y) in enumerate(pairs):
        for tag, image in (("x", x), ("y", y)):
            image_arr = _as_array(image)
            recon = _as_array(fn(image))
            name = getattr(image, "source_id", "") or f"pair{k}_{tag}"
            report.rows.append(
                MetricRow(
                    image_id=name,
                    mse=mse(image_arr, recon),
                    psnr=psnr(image_arr, recon),
                    ssim=ssim(image_arr, recon),
                )
            )
    return report


def export_makeup_codes(model, images) -> list:
    """One (id, 8-vector) row per image, in input order."""
    from . import transfer  # local import to avoid a cycle

    rows = []
    for k, image in enumerate(images):
        pixels = transfer.as_pixels(image)
        t, _ = transfer._prepare(model, pixels)
        code = model.encode_makeup(t).detach().numpy().ravel()
        name = getattr(image, "source_id", "") or f"image{k}"
        rows.append((name, code.astype(np.float64)))
    return rows


def write_code_table(path, rows):
    """Header-bearing delimited table of exported makeup codes."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        dim = len(rows[0][1]) if rows else 8
        writer.writerow(["id"] + [f"m{i}" for i in range(dim)])
        for name, code in rows:
            writer.writerow([name] + [f"{v:.8g}" for v in code])
    return Path(path)


@dataclass
class SweepResult:
    """Decodes of one face with a single makeup-code dimension varied."""

    outputs: list        # one GeneratorOutput per requested value
    values: list
    base_code: np.ndarray
    reconstruction: GeneratorOutput
    nearest_index: int   # sweep entry closest to the unmodified code


def dimension_sweep(model, x, dim: int, values) -> SweepResult:
    """Vary one makeup-code dimension, keeping the others fixed."""
    import torch

    from . import transfer

    values = [float(v) for v in values]
    if not 0 <= dim < model.arch.makeup_dim:
        raise ValueError(f"dim {dim} out of range 0..{model.arch.makeup_dim - 1}")
    if not values:
        raise ValueError("values list is empty")
    model.eval()
    with torch.no_grad():
        x_t, shape = transfer._prepare(model, transfer.as_pixels(x))
        i_x = model.encode_identity(x_t)
        m_x = model.encode_makeup(x_t)
        reconstruction = transfer._restore(model.decode(i_x, m_x, x_t), shape)
        outputs = []
        for value in values:
            code = m_x.clone()
            code[0, dim] = value
            outputs.append(transfer._restore(model.decode(i_x, code, x_t), shape))
    base = m_x.detach().numpy().ravel()
    nearest = int(np.argmin([abs(v - base[dim]) for v in values]))
    return SweepResult(
        outputs=outputs,
        values=values,
        base_code=base,
        reconstruction=reconstruction,
        nearest_index=nearest,
    )
