"""Disentangled facial makeup transfer: data pipeline, networks, training,
inference scenarios, evaluation, and an HTTP service.
"""

from .dataio import (
    CosmeticRegionSet,
    DatasetIndex,
    FaceImage,
    LabelMap,
    RelatedMask,
    SplitSpec,
    augment,
    extract_cosmetic_regions,
    load_dataset,
    related_mask,
)
from .histmatch import PixelSet, makeup_ground_truth, match_histogram
from .losses import LossWeights
from .nets import (
    ArchitectureSpec,
    GeneratorOutput,
    MakeupTransferNet,
    compose_with_mask,
    load_checkpoint,
    save_checkpoint,
)
from .trainer import TrainConfig, desk_config, fit, lr_at_epoch
from .transfer import (
    hybrid,
    interpolated,
    pairwise,
    reconstruct,
    residual,
    sample_multimodal,
)

__version__ = "0.1.0"

__all__ = [
    "ArchitectureSpec",
    "CosmeticRegionSet",
    "DatasetIndex",
    "FaceImage",
    "GeneratorOutput",
    "LabelMap",
    "LossWeights",
    "MakeupTransferNet",
    "PixelSet",
    "RelatedMask",
    "SplitSpec",
    "TrainConfig",
    "augment",
    "compose_with_mask",
    "desk_config",
    "extract_cosmetic_regions",
    "fit",
    "hybrid",
    "interpolated",
    "load_checkpoint",
    "load_dataset",
    "lr_at_epoch",
    "makeup_ground_truth",
    "match_histogram",
    "pairwise",
    "reconstruct",
    "related_mask",
    "residual",
    "sample_multimodal",
    "save_checkpoint",
]
