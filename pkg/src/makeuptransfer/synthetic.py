"""Procedural face images with aligned parsing masks.

Good enough for desk-scale training and for exercising the data pipeline
without shipping a real dataset: every face is an ellipse arrangement with
jittered geometry and colors, and makeup faces get saturated lips, tinted
eye shadow, and darker brows. Photograph-like difficulty comes from
procedural texture: strongly patterned backgrounds and hair, gently shaded
skin, so reconstructions cannot be learned as flat color fills.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import dataio
from .dataio import (
    BACKGROUND,
    FACE,
    HAIR,
    LEFT_BROW,
    LEFT_EAR,
    LEFT_EYE,
    LOWER_LIP,
    MOUTH,
    NECK,
    NOSE,
    RIGHT_BROW,
    RIGHT_EAR,
    RIGHT_EYE,
    UPPER_LIP,
    FaceImage,
    LabelMap,
)


def _ellipse(h, w, cy, cx, ry, rx):
    yy, xx = np.mgrid[0:h, 0:w]
    return ((yy - cy) / max(ry, 1e-6)) ** 2 + ((xx - cx) / max(rx, 1e-6)) ** 2 <= 1.0


def _smooth_field(rng, size, amplitude, max_freq=6.0, waves=3):
    """Random low-frequency pattern in roughly [-amplitude, amplitude]."""
    yy, xx = np.mgrid[0:size, 0:size] / float(size)
    field = np.zeros((size, size))
    for _ in range(waves):
        fy, fx = rng.uniform(1.0, max_freq, size=2)
        py, px = rng.uniform(0, 2 * np.pi, size=2)
        field += np.sin(2 * np.pi * fy * yy + py) * np.sin(2 * np.pi * fx * xx + px)
    return amplitude * field / waves


def _smooth_field3(rng, size, amplitude, max_freq=6.0):
    return np.stack([_smooth_field(rng, size, amplitude, max_freq) for _ in range(3)], axis=2)


def _paint(image, labels, region, color, label):
    image[region] = color
    labels[region] = label


def synthesize_face(rng: np.random.Generator, size: int = 64, makeup: bool = False):
    """One procedural face; returns (FaceImage, LabelMap)."""
    s = float(size)
    image = np.zeros((size, size, 3), dtype=np.float64)
    labels = np.full((size, size), BACKGROUND, dtype=np.int64)

    def jitter(scale=0.02):
        return float(rng.uniform(-scale, scale)) * s

    background = rng.uniform(0.05, 0.45, size=3)
    image[:] = background

    skin = np.clip(np.array([0.78, 0.62, 0.50]) + rng.uniform(-0.08, 0.08, size=3), 0.0, 1.0)
    if makeup:
        # foundation shifts the base tone slightly
        skin = np.clip(skin + rng.uniform(-0.10, 0.10, size=3), 0.0, 1.0)
    hair_color = rng.uniform(0.02, 0.35, size=3)

    cy, cx = 0.54 * s + jitter(), 0.50 * s + jitter()
    face_ry, face_rx = 0.30 * s + jitter(0.015), 0.24 * s + jitter(0.015)

    # neck first so the face chin overlaps it
    neck = np.zeros_like(labels, dtype=bool)
    neck[int(0.72 * s) :, int(cx - 0.10 * s) : int(cx + 0.10 * s)] = True
    _paint(image, labels, neck, skin * 0.96, NECK)

    hair = _ellipse(size, size, cy - 0.14 * s, cx, face_ry * 1.25, face_rx * 1.35)
    _paint(image, labels, hair, hair_color, HAIR)

    ear_ry, ear_rx = 0.05 * s, 0.03 * s
    left_ear = _ellipse(size, size, cy, cx - face_rx - 0.01 * s, ear_ry, ear_rx)
    right_ear = _ellipse(size, size, cy, cx + face_rx + 0.01 * s, ear_ry, ear_rx)
    _paint(image, labels, left_ear, skin * 0.92, LEFT_EAR)
    _paint(image, labels, right_ear, skin * 0.92, RIGHT_EAR)

    face = _ellipse(size, size, cy, cx, face_ry, face_rx)
    _paint(image, labels, face, skin, FACE)

    if makeup:
        # eye shadow tints skin around the eyes; the labels stay "face"
        shadow = rng.uniform(0.0, 0.6, size=3)
        strength = rng.uniform(0.35, 0.7)
        for ex in (cx - 0.10 * s, cx + 0.10 * s):
            patch = _ellipse(size, size, cy - 0.08 * s, ex, 0.065 * s, 0.075 * s) & face
            image[patch] = (1 - strength) * image[patch] + strength * shadow

    brow_color = hair_color * (0.5 if makeup else 0.8)
    eye_color = rng.uniform(0.05, 0.3, size=3)
    for side, (brow_label, eye_label) in zip((-1, 1), ((LEFT_BROW, LEFT_EYE), (RIGHT_BROW, RIGHT_EYE))):
        ex = cx + side * (0.10 * s + jitter(0.008))
        brow = _ellipse(size, size, cy - 0.135 * s + jitter(0.006), ex, 0.016 * s, 0.055 * s)
        _paint(image, labels, brow, brow_color, brow_label)
        eye = _ellipse(size, size, cy - 0.075 * s + jitter(0.005), ex, 0.028 * s, 0.045 * s)
        _paint(image, labels, eye, eye_color, eye_label)

    nose = _ellipse(size, size, cy + 0.03 * s, cx, 0.07 * s, 0.028 * s)
    _paint(image, labels, nose, skin * 0.9, NOSE)

    if makeup:
        lip_color = np.clip(
            np.array([rng.uniform(0.55, 0.95), rng.uniform(0.0, 0.25), rng.uniform(0.1, 0.5)]), 0, 1
        )
    else:
        lip_color = np.clip(skin * np.array([1.05, 0.85, 0.85]), 0, 1)
    mouth_y = cy + 0.17 * s + jitter(0.006)
    upper = _ellipse(size, size, mouth_y - 0.018 * s, cx, 0.020 * s, 0.075 * s)
    lower = _ellipse(size, size, mouth_y + 0.022 * s, cx, 0.026 * s, 0.070 * s)
    mouth = _ellipse(size, size, mouth_y, cx, 0.008 * s, 0.055 * s)
    _paint(image, labels, upper, lip_color, UPPER_LIP)
    _paint(image, labels, lower, lip_color * 0.95, LOWER_LIP)
    _paint(image, labels, mouth, np.array([0.15, 0.05, 0.05]), MOUTH)

    # texture pass: busy background and hair, gently shaded skin
    is_background = labels == BACKGROUND
    image[is_background] += _smooth_field3(rng, size, 0.18, max_freq=8.0)[is_background]
    yy, xx = np.mgrid[0:size, 0:size] / s
    angle = rng.uniform(0, np.pi)
    stripes = 0.10 * np.sin(
        2 * np.pi * rng.uniform(6.0, 12.0) * (np.cos(angle) * yy + np.sin(angle) * xx)
        + rng.uniform(0, 2 * np.pi)
    )
    is_hair = labels == HAIR
    image[is_hair] += stripes[is_hair, None]
    skin_parts = np.isin(labels, (FACE, NOSE, LEFT_EAR, RIGHT_EAR, NECK))
    image[skin_parts] += _smooth_field3(rng, size, 0.06)[skin_parts]
    lip_parts = np.isin(labels, (UPPER_LIP, LOWER_LIP, LEFT_BROW, RIGHT_BROW))
    image[lip_parts] += _smooth_field3(rng, size, 0.04)[lip_parts]

    image = np.clip(image, 0.0, 1.0)
    return FaceImage(pixels=image, has_makeup=makeup), LabelMap(labels=labels)


def write_dataset(
    root,
    n_makeup: int = 120,
    n_nonmakeup: int = 120,
    size: int = 64,
    seed: int = 0,
) -> Path:
    """Materialize a synthetic dataset in the documented on-disk layout."""
    root = Path(root)
    rng = np.random.default_rng(seed)
    for kind, count, makeup in (("makeup", n_makeup, True), ("non-makeup", n_nonmakeup, False)):
        image_dir = root / "images" / kind
        mask_dir = root / "masks" / kind
        image_dir.mkdir(parents=True, exist_ok=True)
        mask_dir.mkdir(parents=True, exist_ok=True)
        for i in range(count):
            face, label_map = synthesize_face(rng, size=size, makeup=makeup)
            stem = f"{kind.replace('-', '_')}_{i:04d}"
            dataio.save_image(image_dir / f"{stem}.png", face.pixels)
            dataio.save_labels(mask_dir / f"{stem}.png", label_map.labels)
    return root
