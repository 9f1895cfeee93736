"""Training loop: pair sampling, the full forward graph, alternating D/G
updates, the learning-rate schedule, logging, and resumable checkpoints.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import dataio, histmatch, losses, nets
from .dataio import DatasetIndex, FaceImage, LabelMap, SplitSpec
from .losses import LossWeights
from .nets import ArchitectureSpec, MakeupTransferNet

LOG_FIELDS = ("adv_g", "adv_d", "rec", "per", "mak", "imr", "a", "kl", "tv")


@dataclass
class TrainConfig:
    """Flat, JSON-serializable run configuration."""

    dataset_root: str = ""
    out_dir: str = "runs/default"
    image_size: int = 256
    base_channels: int = 64
    identity_res_blocks: int = 4
    decoder_res_blocks: int = 4
    makeup_dim: int = 8
    mlp_hidden: int = 256
    epochs: int = 100
    decay_start_epoch: int = 50
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    batch_size: int = 1
    seed: int = 0
    steps_per_epoch: int = 0  # 0 -> size of the larger training pool
    checkpoint_every: int = 10  # epochs
    test_makeup: int = 250
    test_nonmakeup: int = 100
    eye_margin: float = 0.5
    reconstruct_both: bool = True
    perceptual: str = "vgg16"  # vgg16 | random | none
    perceptual_seed: int = 0
    vgg_weights: str = ""
    grad_clip: float = 0.0
    label_table: dict = None
    weights: LossWeights = field(default_factory=LossWeights)

    def __post_init__(self):
        if self.batch_size != 1:
            raise ValueError("only batch_size=1 is supported")
        for name in ("epochs", "lr", "image_size", "base_channels"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.image_size % 4 != 0:
            raise ValueError("image_size must be divisible by 4")

    def arch(self) -> ArchitectureSpec:
        return ArchitectureSpec(
            image_size=self.image_size,
            base_channels=self.base_channels,
            identity_res_blocks=self.identity_res_blocks,
            decoder_res_blocks=self.decoder_res_blocks,
            makeup_dim=self.makeup_dim,
            mlp_hidden=self.mlp_hidden,
        )

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        weights = data.pop("weights")
        for key, value in weights.items():
            data[f"lambda_{key}"] = value
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        data = dict(data)
        weight_kwargs = {}
        for key in list(data):
            if key.startswith("lambda_"):
                weight_kwargs[key[len("lambda_") :]] = data.pop(key)
        if weight_kwargs:
            data["weights"] = LossWeights(**weight_kwargs)
        return cls(**data)

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "TrainConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def desk_config(dataset_root, out_dir, **overrides) -> TrainConfig:
    """Reduced-scale preset: 64x64 images, narrow nets, ~2k steps, no VGG.

    Weights are retuned for this scale (recorded here and in the saved run
    config): lambda_per is zeroed because the desk profile runs without the
    pretrained extractor; the attention weight rises to 50 so the mask locks
    onto its ground truth within the first few dozen steps instead of
    transiently collapsing; the region weights drop to 10 because at toy
    capacity the full-scale value of 50 starves reconstruction.
    """
    base = dict(
        dataset_root=str(dataset_root),
        out_dir=str(out_dir),
        image_size=64,
        base_channels=16,
        epochs=10,
        decay_start_epoch=5,
        steps_per_epoch=200,
        checkpoint_every=5,
        test_makeup=10,
        test_nonmakeup=10,
        perceptual="none",
        weights=LossWeights(per=0.0, attention=50.0, face=10.0, brow=10.0, eye=10.0, lip=10.0),
    )
    base.update(overrides)
    return TrainConfig(**base)


def lr_at_epoch(epoch: int, base_lr: float = 2e-4, total_epochs: int = 100, decay_start: int = 50) -> float:
    """Constant through decay_start, then per-epoch linear decay to 0 at total_epochs."""
    if epoch < 1:
        raise ValueError(f"epochs are 1-based, got {epoch}")
    if epoch <= decay_start:
        return base_lr
    span = total_epochs - decay_start
    return base_lr * max(0.0, 1.0 - (epoch - decay_start) / span)


def choose_pair_entries(index: DatasetIndex, rng: np.random.Generator):
    """Pick the (x, y) dataset entries; each side is makeup with probability 1/2.

    A pool that only holds one kind of image is degenerate but legal: every
    draw then comes from that kind. Returns two
    (image_path, mask_path, has_makeup) tuples.
    """
    if not index.train_makeup and not index.train_nonmakeup:
        raise ValueError("training pool is empty")
    picks = []
    for _ in range(2):
        makeup = bool(rng.random() < 0.5)
        if makeup and not index.train_makeup:
            makeup = False
        elif not makeup and not index.train_nonmakeup:
            makeup = True
        pool = index.train_makeup if makeup else index.train_nonmakeup
        image_path, mask_path = pool[int(rng.integers(0, len(pool)))]
        picks.append((image_path, mask_path, makeup))
    return tuple(picks)


@dataclass
class TrainSample:
    x: FaceImage
    y: FaceImage
    labels_x: LabelMap
    labels_y: LabelMap


def sample_pair(
    index: DatasetIndex,
    rng: np.random.Generator,
    image_size: int = 256,
    label_table: dict = None,
) -> TrainSample:
    """Draw, load, and augment one training pair."""
    entry_x, entry_y = choose_pair_entries(index, rng)
    loaded = []
    for image_path, mask_path, makeup in (entry_x, entry_y):
        image = dataio.load_image(image_path, has_makeup=makeup)
        labels = dataio.load_labels(mask_path, label_table)
        loaded.append(dataio.augment(image, labels, rng, crop_size=image_size))
    (x, labels_x), (y, labels_y) = loaded
    return TrainSample(x=x, y=y, labels_x=labels_x, labels_y=labels_y)


@dataclass
class TrainBatch:
    """Tensors and precomputed targets for one step."""

    x: torch.Tensor
    y: torch.Tensor
    x_y: torch.Tensor           # histogram-matched makeup ground truth
    regions_x: dataio.CosmeticRegionSet
    related_x: torch.Tensor     # attention ground truth, 1 x 1 x H x W
    related_y: torch.Tensor

    @property
    def images(self):
        return self.x, self.y


def prepare_batch(sample: TrainSample, eye_margin: float = 0.5) -> TrainBatch:
    regions_x = dataio.extract_cosmetic_regions(sample.labels_x, eye_margin)
    regions_y = dataio.extract_cosmetic_regions(sample.labels_y, eye_margin)
    ground_truth = histmatch.makeup_ground_truth(sample.x, sample.y, regions_x, regions_y)
    as_mask = lambda m: torch.from_numpy(m.astype(np.float32))[None, None]
    return TrainBatch(
        x=nets.to_tensor(sample.x.pixels),
        y=nets.to_tensor(sample.y.pixels),
        x_y=nets.to_tensor(ground_truth.pixels),
        regions_x=regions_x,
        related_x=as_mask(dataio.related_mask(sample.labels_x).mask),
        related_y=as_mask(dataio.related_mask(sample.labels_y).mask),
    )


@dataclass
class TrainState:
    model: MakeupTransferNet
    opt_g: torch.optim.Adam
    opt_d: torch.optim.Adam
    np_rng: np.random.Generator
    torch_rng: torch.Generator
    config: TrainConfig
    extractor: losses.FeatureExtractor = None
    step: int = 0
    epoch: int = 0


def _build_extractor(config: TrainConfig):
    if config.perceptual == "none" or config.weights.per == 0:
        return None
    if config.perceptual == "random":
        return losses.random_feature_extractor(config.perceptual_seed)
    if config.perceptual == "vgg16":
        return losses.vgg16_relu4_1(config.vgg_weights or None)
    raise ValueError(f"unknown perceptual extractor '{config.perceptual}'")


def init_state(config: TrainConfig) -> TrainState:
    torch.manual_seed(config.seed)
    model = MakeupTransferNet(config.arch())
    opt_g = torch.optim.Adam(model.generator_parameters(), lr=config.lr, betas=(config.beta1, config.beta2))
    opt_d = torch.optim.Adam(model.discriminator.parameters(), lr=config.lr, betas=(config.beta1, config.beta2))
    torch_rng = torch.Generator().manual_seed(config.seed)
    return TrainState(
        model=model,
        opt_g=opt_g,
        opt_d=opt_d,
        np_rng=np.random.default_rng(config.seed),
        torch_rng=torch_rng,
        config=config,
        extractor=_build_extractor(config),
    )


def set_lr(state: TrainState, lr: float):
    for opt in (state.opt_g, state.opt_d):
        for group in opt.param_groups:
            group["lr"] = lr


def train_step(state: TrainState, batch: TrainBatch) -> dict:
    """One full step: D update on the adversarial loss, then a G-side update.

    Fakes enter the D update detached; the G update leaves D's parameters
    untouched because only generator-side parameters sit in its optimizer.
    Returns the per-term loss record.
    """
    model = state.model
    config = state.config
    w = config.weights
    model.train()

    x, y = batch.images
    i_x = model.encode_identity(x)
    m_x = model.encode_makeup(x)
    m_y = model.encode_makeup(y)
    out_r = model.decode(i_x, m_x, x)
    out_s = model.decode(i_x, m_y, x)
    m_rand = torch.randn(1, config.makeup_dim, generator=state.torch_rng)
    out_f = model.decode(i_x, m_rand, x)
    i_x_s = model.encode_identity(out_s.composed)
    m_x_s = model.encode_makeup(out_s.composed)

    # discriminator update; generated images are constants here
    d_real = model.discriminate(x)
    loss_d = losses.adversarial_loss_d(
        d_real,
        model.discriminate(out_s.composed.detach()),
        model.discriminate(out_f.composed.detach()),
    )
    state.opt_d.zero_grad()
    loss_d.backward()
    if config.grad_clip > 0:
        torch.nn.utils.clip_grad_norm_(model.discriminator.parameters(), config.grad_clip)
    state.opt_d.step()

    # generator-side update; D is a fixed critic now
    rec = losses.reconstruction_loss(x, out_r.composed)
    # every decode of an image carries a mask that should localize that
    # image's makeup-related region; penalizing all of them blocks the
    # reconstruction path from collapsing its mask to copy the input
    mask_pairs = [
        (out_r.mask, batch.related_x),
        (out_s.mask, batch.related_x),
        (out_f.mask, batch.related_x),
    ]
    if config.reconstruct_both:
        out_yr = model.decode(model.encode_identity(y), m_y, y)
        rec = (rec + losses.reconstruction_loss(y, out_yr.composed)) / 2
        mask_pairs.append((out_yr.mask, batch.related_y))
    per = (
        losses.perceptual_loss(x, out_s.composed, state.extractor)
        if w.per > 0
        else x.new_zeros(())
    )
    terms = {
        "adv_g": losses.adversarial_loss_g(
            model.discriminate(out_s.composed), model.discriminate(out_f.composed)
        ),
        "adv_d": loss_d,
        "rec": rec,
        "per": per,
        "mak": losses.makeup_loss(out_s.composed, batch.x_y, batch.regions_x, w),
        "imr": losses.imr_loss(i_x, i_x_s, m_y, m_x_s, w),
        "a": sum(losses.attention_loss(m, t) for m, t in mask_pairs) / len(mask_pairs),
        "kl": losses.kl_loss(m_x, m_y),
        "tv": sum(losses.tv_loss(m) for m, _ in mask_pairs) / len(mask_pairs),
    }
    loss_g = (
        terms["adv_g"]
        + w.rec * terms["rec"]
        + w.per * terms["per"]
        + terms["mak"]
        + terms["imr"]
        + w.attention * terms["a"]
        + w.kl * terms["kl"]
        + w.tv * terms["tv"]
    )
    state.opt_g.zero_grad()
    loss_g.backward()
    if config.grad_clip > 0:
        torch.nn.utils.clip_grad_norm_(model.generator_parameters(), config.grad_clip)
    state.opt_g.step()

    state.step += 1
    record = {name: float(terms[name].detach()) for name in LOG_FIELDS}
    record.update(loss_g=float(loss_g.detach()), loss_d=float(loss_d.detach()))
    for name, value in record.items():
        if not math.isfinite(value):
            raise RuntimeError(f"non-finite loss term '{name}' at step {state.step}")
    record.update(step=state.step, epoch=state.epoch)
    return record


def save_train_state(path, state: TrainState):
    nets.save_checkpoint(
        path,
        state.model,
        extra={
            "trainer": {
                "opt_g": state.opt_g.state_dict(),
                "opt_d": state.opt_d.state_dict(),
                "np_rng": state.np_rng.bit_generator.state,
                "torch_rng": state.torch_rng.get_state(),
                "torch_global_rng": torch.get_rng_state(),
                "step": state.step,
                "epoch": state.epoch,
                "config": state.config.to_dict(),
            }
        },
    )


def load_train_state(path) -> TrainState:
    model, extra = nets.load_checkpoint(path)
    saved = extra["trainer"]
    config = TrainConfig.from_dict(saved["config"])
    opt_g = torch.optim.Adam(model.generator_parameters(), lr=config.lr, betas=(config.beta1, config.beta2))
    opt_d = torch.optim.Adam(model.discriminator.parameters(), lr=config.lr, betas=(config.beta1, config.beta2))
    opt_g.load_state_dict(saved["opt_g"])
    opt_d.load_state_dict(saved["opt_d"])
    np_rng = np.random.default_rng()
    np_rng.bit_generator.state = saved["np_rng"]
    torch_rng = torch.Generator()
    torch_rng.set_state(saved["torch_rng"])
    torch.set_rng_state(saved["torch_global_rng"])
    return TrainState(
        model=model,
        opt_g=opt_g,
        opt_d=opt_d,
        np_rng=np_rng,
        torch_rng=torch_rng,
        config=config,
        extractor=_build_extractor(config),
        step=saved["step"],
        epoch=saved["epoch"],
    )


def run_steps(state: TrainState, index: DatasetIndex, n_steps: int, log_file=None) -> list:
    """Run n training steps against the index, returning their loss records."""
    records = []
    for _ in range(n_steps):
        sample = sample_pair(
            index, state.np_rng, image_size=state.config.image_size, label_table=state.config.label_table
        )
        batch = prepare_batch(sample, state.config.eye_margin)
        record = train_step(state, batch)
        records.append(record)
        if log_file is not None:
            log_file.write(json.dumps(record) + "\n")
    return records


def fit(config: TrainConfig, resume_from=None) -> Path:
    """Train per the schedule, checkpointing along the way; returns the final path."""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config.save(out_dir / "config.json")
    index = dataio.load_dataset(
        config.dataset_root,
        SplitSpec(test_makeup=config.test_makeup, test_nonmakeup=config.test_nonmakeup, seed=config.seed),
    )
    state = load_train_state(resume_from) if resume_from else init_state(config)
    steps_per_epoch = config.steps_per_epoch or max(len(index.train_makeup), len(index.train_nonmakeup))
    final_path = out_dir / "final.pt"
    with open(out_dir / "train_log.jsonl", "a") as log_file:
        for epoch in range(state.epoch + 1, config.epochs + 1):
            state.epoch = epoch
            lr = lr_at_epoch(epoch, config.lr, config.epochs, config.decay_start_epoch)
            set_lr(state, lr)
            records = run_steps(state, index, steps_per_epoch, log_file)
            mean_g = sum(r["loss_g"] for r in records) / len(records)
            mean_d = sum(r["loss_d"] for r in records) / len(records)
            print(f"epoch {epoch}/{config.epochs} lr={lr:.2e} loss_g={mean_g:.4f} loss_d={mean_d:.4f}")
            if epoch % config.checkpoint_every == 0 or epoch == config.epochs:
                save_train_state(out_dir / f"checkpoint_epoch{epoch:04d}.pt", state)
                save_train_state(out_dir / "latest.pt", state)
    save_train_state(final_path, state)
    return final_path
