"""Dataset ingestion, parsing-mask semantics, cosmetic regions, and augmentation.

Parsing masks use 14 canonical part IDs (background=0 .. neck=13). On-disk
masks with a different encoding are remapped through a label table supplied
in the run config.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np
from PIL import Image

BACKGROUND = 0
FACE = 1
LEFT_BROW = 2
RIGHT_BROW = 3
LEFT_EYE = 4
RIGHT_EYE = 5
NOSE = 6
UPPER_LIP = 7
LOWER_LIP = 8
MOUTH = 9
HAIR = 10
LEFT_EAR = 11
RIGHT_EAR = 12
NECK = 13

NUM_LABELS = 14

LABEL_NAMES = (
    "background",
    "face",
    "left_brow",
    "right_brow",
    "left_eye",
    "right_eye",
    "nose",
    "upper_lip",
    "lower_lip",
    "mouth",
    "hair",
    "left_ear",
    "right_ear",
    "neck",
)

# Label sets behind the four cosmetic regions.
FACE_REGION_LABELS = (FACE, NOSE, LEFT_EAR, RIGHT_EAR, NECK)
BROW_REGION_LABELS = (LEFT_BROW, RIGHT_BROW)
LIP_REGION_LABELS = (UPPER_LIP, LOWER_LIP)
EYE_LABELS = (LEFT_EYE, RIGHT_EYE)
# Pixels removed from the expanded eye rectangles.
EYE_BOX_EXCLUDED_LABELS = (HAIR, LEFT_EYE, RIGHT_EYE, LEFT_BROW, RIGHT_BROW)
# Labels excluded from the makeup-related ground-truth mask.
RELATED_EXCLUDED_LABELS = (BACKGROUND, LEFT_EYE, RIGHT_EYE, HAIR)

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")


@dataclass
class FaceImage:
    """H x W x 3 float image with values in [0, 1]."""

    pixels: np.ndarray
    source_id: str = ""
    has_makeup: bool = False

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ValueError(f"expected HxWx3 pixels, got shape {self.pixels.shape}")
        lo, hi = float(self.pixels.min()), float(self.pixels.max())
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"pixel values outside [0, 1]: min={lo}, max={hi}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass
class LabelMap:
    """H x W integer parsing mask with canonical part IDs."""

    labels: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels)
        if self.labels.ndim != 2:
            raise ValueError(f"expected HxW labels, got shape {self.labels.shape}")
        if not np.issubdtype(self.labels.dtype, np.integer):
            raise ValueError(f"labels must be integers, got dtype {self.labels.dtype}")
        lo, hi = int(self.labels.min()), int(self.labels.max())
        if lo < 0 or hi >= NUM_LABELS:
            raise ValueError(f"label IDs outside 0..{NUM_LABELS - 1}: min={lo}, max={hi}")

    @property
    def shape(self):
        return self.labels.shape


@dataclass
class CosmeticRegionSet:
    """Binary masks for the four cosmetic regions."""

    face: np.ndarray
    brow: np.ndarray
    eye: np.ndarray
    lip: np.ndarray

    def items(self):
        return (("face", self.face), ("brow", self.brow), ("eye", self.eye), ("lip", self.lip))


@dataclass
class RelatedMask:
    """Binary ground truth for the attention mask (makeup-related pixels)."""

    mask: np.ndarray


@dataclass
class DatasetIndex:
    """Split listing of (image path, mask path) pairs."""

    train_makeup: list = field(default_factory=list)
    train_nonmakeup: list = field(default_factory=list)
    test_makeup: list = field(default_factory=list)
    test_nonmakeup: list = field(default_factory=list)
    seed: int = 0


@dataclass
class SplitSpec:
    """How many images of each kind go to the test set."""

    test_makeup: int = 250
    test_nonmakeup: int = 100
    seed: int = 0


def _list_pairs(root: Path, kind: str) -> list:
    """Collect (image, mask) path pairs for one subtree, validating existence and size."""
    image_dir = root / "images" / kind
    mask_dir = root / "masks" / kind
    if not image_dir.is_dir():
        raise FileNotFoundError(f"missing image directory: {image_dir}")
    if not mask_dir.is_dir():
        raise FileNotFoundError(f"missing mask directory: {mask_dir}")
    pairs = []
    for image_path in sorted(image_dir.iterdir()):
        if image_path.suffix.lower() not in IMAGE_EXTENSIONS:
            continue
        mask_path = mask_dir / (image_path.stem + ".png")
        if not mask_path.is_file():
            raise FileNotFoundError(f"no parsing mask for image {image_path} (expected {mask_path})")
        try:
            with Image.open(image_path) as im:
                image_size = im.size
        except Exception as exc:
            raise OSError(f"unreadable image {image_path}: {exc}") from exc
        with Image.open(mask_path) as mm:
            mask_size = mm.size
        if image_size != mask_size:
            raise ValueError(
                f"size mismatch for {image_path}: image {image_size} vs mask {mask_size}"
            )
        pairs.append((str(image_path), str(mask_path)))
    return pairs


def load_dataset(root, split: SplitSpec = None) -> DatasetIndex:
    """Index a dataset laid out as <root>/images/{makeup,non-makeup}, <root>/masks/{...}.

    The test split is a seeded random subset, so the same seed always yields
    the same membership.
    """
    split = split or SplitSpec()
    root = Path(root)
    makeup = _list_pairs(root, "makeup")
    nonmakeup = _list_pairs(root, "non-makeup")
    if split.test_makeup > len(makeup):
        raise ValueError(f"test_makeup={split.test_makeup} exceeds {len(makeup)} makeup images")
    if split.test_nonmakeup > len(nonmakeup):
        raise ValueError(
            f"test_nonmakeup={split.test_nonmakeup} exceeds {len(nonmakeup)} non-makeup images"
        )
    rng = np.random.default_rng(split.seed)
    makeup_order = rng.permutation(len(makeup))
    nonmakeup_order = rng.permutation(len(nonmakeup))
    test_m = sorted(makeup_order[: split.test_makeup])
    test_n = sorted(nonmakeup_order[: split.test_nonmakeup])
    test_m_set, test_n_set = set(test_m), set(test_n)
    return DatasetIndex(
        train_makeup=[makeup[i] for i in range(len(makeup)) if i not in test_m_set],
        train_nonmakeup=[nonmakeup[i] for i in range(len(nonmakeup)) if i not in test_n_set],
        test_makeup=[makeup[i] for i in test_m],
        test_nonmakeup=[nonmakeup[i] for i in test_n],
        seed=split.seed,
    )


def load_image(path, has_makeup: bool = False) -> FaceImage:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return FaceImage(pixels=arr, source_id=Path(path).stem, has_makeup=has_makeup)


def load_labels(path, label_table: dict = None) -> LabelMap:
    """Read a single-channel 8-bit label image, remapping on-disk IDs if a table is given."""
    with Image.open(path) as im:
        raw = np.asarray(im.convert("L"), dtype=np.int64)
    if label_table is not None:
        lut = np.full(256, -1, dtype=np.int64)
        for disk_id, canonical in label_table.items():
            lut[int(disk_id)] = int(canonical)
        mapped = lut[raw]
        if (mapped < 0).any():
            unknown = sorted(np.unique(raw[mapped < 0]).tolist())
            raise ValueError(f"mask {path} contains IDs {unknown} missing from the label table")
        raw = mapped
    return LabelMap(labels=raw)


def _eye_box(labels: np.ndarray, label: int, margin: float):
    rows, cols = np.nonzero(labels == label)
    if rows.size == 0:
        return None
    r0, r1 = int(rows.min()), int(rows.max())
    c0, c1 = int(cols.min()), int(cols.max())
    pad_r = int(math.floor(margin * (r1 - r0 + 1) + 0.5))
    pad_c = int(math.floor(margin * (c1 - c0 + 1) + 0.5))
    h, w = labels.shape
    return (
        max(r0 - pad_r, 0),
        min(r1 + pad_r, h - 1),
        max(c0 - pad_c, 0),
        min(c1 + pad_c, w - 1),
    )


def extract_cosmetic_regions(label_map: LabelMap, eye_margin: float = 0.5) -> CosmeticRegionSet:
    """Build the face / brow / eye / lip cosmetic-region masks from a parsing mask.

    The eye region is the union of each eye's bounding box expanded by
    ``eye_margin`` of its own height/width per side (clipped to the image),
    minus any hair, eye, or eyebrow pixels. A map without eye pixels yields
    an all-zero eye mask.
    """
    if eye_margin < 0:
        raise ValueError(f"eye_margin must be >= 0, got {eye_margin}")
    labels = label_map.labels
    face = np.isin(labels, FACE_REGION_LABELS)
    brow = np.isin(labels, BROW_REGION_LABELS)
    lip = np.isin(labels, LIP_REGION_LABELS)
    eye = np.zeros(labels.shape, dtype=bool)
    for eye_label in EYE_LABELS:
        box = _eye_box(labels, eye_label, eye_margin)
        if box is not None:
            r0, r1, c0, c1 = box
            eye[r0 : r1 + 1, c0 : c1 + 1] = True
    eye &= ~np.isin(labels, EYE_BOX_EXCLUDED_LABELS)
    as_mask = lambda m: m.astype(np.uint8)
    return CosmeticRegionSet(face=as_mask(face), brow=as_mask(brow), eye=as_mask(eye), lip=as_mask(lip))


def related_mask(label_map: LabelMap) -> RelatedMask:
    """Makeup-related ground truth: everything except background, eyes, and hair."""
    excluded = np.isin(label_map.labels, RELATED_EXCLUDED_LABELS)
    return RelatedMask(mask=(~excluded).astype(np.uint8))


def resize_ratio_for(crop_size: int) -> int:
    """Pre-crop resize target, scaled from the 286-then-256 recipe."""
    return int(round(crop_size * 286 / 256))


def apply_augment(
    image: FaceImage,
    label_map: LabelMap,
    top: int,
    left: int,
    flip: bool,
    resize_size: int,
    crop_size: int,
):
    """Deterministic augmentation core: resize, crop at (top, left), optional h-flip.

    Images are resampled bilinearly, labels by nearest neighbor so they stay
    categorical; both receive identical geometry.
    """
    if image.pixels.shape[:2] != label_map.labels.shape:
        raise ValueError("image and labels are not aligned")
    if not (0 <= top <= resize_size - crop_size and 0 <= left <= resize_size - crop_size):
        raise ValueError(f"crop origin ({top}, {left}) out of range for {resize_size}->{crop_size}")
    pixels = cv2.resize(image.pixels, (resize_size, resize_size), interpolation=cv2.INTER_LINEAR)
    pixels = np.clip(pixels, 0.0, 1.0)
    labels = cv2.resize(
        label_map.labels.astype(np.uint8), (resize_size, resize_size), interpolation=cv2.INTER_NEAREST
    ).astype(np.int64)
    pixels = pixels[top : top + crop_size, left : left + crop_size]
    labels = labels[top : top + crop_size, left : left + crop_size]
    if flip:
        pixels = pixels[:, ::-1]
        labels = labels[:, ::-1]
    out_image = FaceImage(
        pixels=np.ascontiguousarray(pixels),
        source_id=image.source_id,
        has_makeup=image.has_makeup,
    )
    return out_image, LabelMap(labels=np.ascontiguousarray(labels))


def augment(
    image: FaceImage,
    label_map: LabelMap,
    rng: np.random.Generator,
    crop_size: int = 256,
    resize_size: int = None,
):
    """Seeded train-time augmentation: resize, random crop, horizontal flip (p=0.5)."""
    resize_size = resize_size or resize_ratio_for(crop_size)
    span = resize_size - crop_size
    top = int(rng.integers(0, span + 1))
    left = int(rng.integers(0, span + 1))
    flip = bool(rng.random() < 0.5)
    return apply_augment(image, label_map, top, left, flip, resize_size, crop_size)


def save_image(path, pixels: np.ndarray):
    arr = np.clip(np.asarray(pixels, dtype=np.float64), 0.0, 1.0)
    Image.fromarray((arr * 255.0 + 0.5).astype(np.uint8)).save(path)


def save_labels(path, labels: np.ndarray):
    Image.fromarray(labels.astype(np.uint8), mode="L").save(path)
