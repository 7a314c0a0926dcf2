"""Training loop, checkpointing, and the checkpoint-backed denoiser.

Each batch does one discriminator update (real pair, then the detached fake)
followed by one generator update on the combined adversarial + weighted L1
objective. Batch order is a pure function of the seed; torch is pinned to a
single thread during training so loss histories reproduce bit-for-bit on a
machine.

Checkpoints are self-describing: a format tag, both network configs, the
resolved TrainConfig, parameter and optimizer state, the epoch counter, and
the torch RNG state, so training can resume and inference can rebuild the
exact architecture without outside knowledge.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import torch

from ..image_codec import IMAGE_SIDE, ScaleInfo, decode, encode, from_network_range
from ..dataset import ContaminatedCorpus, Corpus
from ..signal_core import Segment, SegmentKind
from .losses import (
    adversarial_losses,
    generator_adversarial_loss,
    l1_loss,
    total_generator_loss,
)
from .models import (
    Discriminator,
    DiscriminatorConfig,
    Generator,
    GeneratorConfig,
    init_weights,
)

CHECKPOINT_FORMAT = "emgscrub.ckpt"
CHECKPOINT_VERSION = 1


class NonFiniteLossError(RuntimeError):
    """Training hit a NaN/Inf loss; message carries epoch/batch diagnostics."""


class CheckpointError(RuntimeError):
    """Checkpoint file is missing, malformed, or disagrees with the requested setup."""


@dataclass(frozen=True)
class TrainConfig:
    l1_weight: float = 100.0
    learning_rate: float = 2e-4
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    batch_size: int = 64
    epochs: int = 100
    seed: int = 0
    dropout: float = 0.5
    base_channels: int = 64
    n_resnet_blocks: int = 6
    patch_head: bool = False

    def __post_init__(self):
        if self.l1_weight < 0:
            raise ValueError(f"l1_weight must be >= 0, got {self.l1_weight}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0,1), got {self.dropout}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")

    def generator_config(self) -> GeneratorConfig:
        return GeneratorConfig(
            base_channels=self.base_channels,
            max_channels=4 * self.base_channels,
            n_resnet_blocks=self.n_resnet_blocks,
            dropout=self.dropout,
        )

    def discriminator_config(self) -> DiscriminatorConfig:
        return DiscriminatorConfig(
            base_channels=self.base_channels,
            image_side=IMAGE_SIDE,
            patch_head=self.patch_head,
        )


@dataclass
class PairedImages:
    """Paired (condition, target) images in network range, ready to batch.

    cond holds the contaminated encodings, target the clean ones; both are
    (n, 1, 32, 32) float32 tensors in [-1, 1].
    """

    cond: torch.Tensor
    target: torch.Tensor

    def __post_init__(self):
        if self.cond.shape != self.target.shape:
            raise ValueError(
                f"cond/target shapes differ: {tuple(self.cond.shape)} vs "
                f"{tuple(self.target.shape)}"
            )
        if self.cond.ndim != 4 or self.cond.shape[1] != 1:
            raise ValueError(f"expected (n, 1, h, w), got {tuple(self.cond.shape)}")
        if self.cond.shape[0] == 0:
            raise ValueError("paired image set is empty")

    def __len__(self) -> int:
        return self.cond.shape[0]


def _to_network_batch(samples: np.ndarray) -> torch.Tensor:
    from ..image_codec import encode_batch

    pixels, _, _ = encode_batch(samples)
    grid = 2.0 * pixels - 1.0
    return torch.from_numpy(grid.astype(np.float32)).unsqueeze(1)


def paired_images_from(cc: ContaminatedCorpus, clean: Corpus) -> PairedImages:
    """Encode a contaminated corpus and its clean references for training."""
    clean_rows = clean.samples[cc.clean_indices]
    return PairedImages(
        cond=_to_network_batch(cc.samples),
        target=_to_network_batch(clean_rows),
    )


@dataclass
class Checkpoint:
    generator: Generator
    discriminator: Discriminator
    opt_g_state: dict
    opt_d_state: dict
    epoch: int
    config: TrainConfig
    torch_rng_state: torch.Tensor = field(default_factory=torch.get_rng_state)


@dataclass(frozen=True)
class EpochLosses:
    epoch: int
    loss_d: float
    loss_g_adv: float
    l1: float
    loss_g_total: float


def train(
    data: PairedImages,
    cfg: TrainConfig,
    callback: Optional[Callable[[EpochLosses], None]] = None,
) -> tuple[Checkpoint, list[EpochLosses]]:
    """Train the GAN and return the final checkpoint plus per-epoch losses."""
    torch.set_num_threads(1)  # keeps reductions bit-reproducible on any host
    torch.manual_seed(cfg.seed)

    generator = Generator(cfg.generator_config())
    discriminator = Discriminator(cfg.discriminator_config())
    init_weights(generator)
    init_weights(discriminator)

    betas = (cfg.adam_beta1, cfg.adam_beta2)
    opt_g = torch.optim.Adam(generator.parameters(), lr=cfg.learning_rate, betas=betas)
    opt_d = torch.optim.Adam(discriminator.parameters(), lr=cfg.learning_rate, betas=betas)

    n = len(data)
    perm_gen = torch.Generator().manual_seed(cfg.seed)
    history: list[EpochLosses] = []

    generator.train()
    discriminator.train()
    for epoch in range(cfg.epochs):
        perm = torch.randperm(n, generator=perm_gen)
        sums = np.zeros(3)
        n_batches = 0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            cond = data.cond[idx]
            real = data.target[idx]

            fake = generator(cond)

            opt_d.zero_grad()
            loss_d, _ = adversarial_losses(
                discriminator(cond, real), discriminator(cond, fake.detach())
            )
            loss_d.backward()
            opt_d.step()

            opt_g.zero_grad()
            loss_g_adv = generator_adversarial_loss(discriminator(cond, fake))
            l1 = l1_loss(fake, real)
            loss_g = total_generator_loss(loss_g_adv, l1, cfg.l1_weight)
            loss_g.backward()
            opt_g.step()

            vals = (loss_d.item(), loss_g_adv.item(), l1.item())
            if not all(np.isfinite(v) for v in vals):
                raise NonFiniteLossError(
                    f"non-finite loss at epoch {epoch}, batch {n_batches}: "
                    f"loss_d={vals[0]}, loss_g_adv={vals[1]}, l1={vals[2]}"
                )
            sums += vals
            n_batches += 1

        mean_d, mean_adv, mean_l1 = sums / n_batches
        stats = EpochLosses(
            epoch=epoch,
            loss_d=float(mean_d),
            loss_g_adv=float(mean_adv),
            l1=float(mean_l1),
            loss_g_total=float(mean_adv + cfg.l1_weight * mean_l1),
        )
        history.append(stats)
        if callback is not None:
            callback(stats)

    ckpt = Checkpoint(
        generator=generator,
        discriminator=discriminator,
        opt_g_state=opt_g.state_dict(),
        opt_d_state=opt_d.state_dict(),
        epoch=cfg.epochs,
        config=cfg,
    )
    return ckpt, history


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "train_config": asdict(ckpt.config),
        "generator_state": ckpt.generator.state_dict(),
        "discriminator_state": ckpt.discriminator.state_dict(),
        "opt_g_state": ckpt.opt_g_state,
        "opt_d_state": ckpt.opt_d_state,
        "epoch": ckpt.epoch,
        "torch_rng_state": ckpt.torch_rng_state,
    }
    torch.save(payload, path)


def load_checkpoint(path, expect: Optional[TrainConfig] = None) -> Checkpoint:
    """Rebuild models from a checkpoint file.

    If `expect` is given, its architecture fields must agree with the stored
    config (training hyperparameters are free to differ).
    """
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as e:
        raise CheckpointError(f"unreadable checkpoint {path}: {e}") from e
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not a recognized checkpoint file")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint version {payload.get('version')} unsupported "
            f"(expected {CHECKPOINT_VERSION})"
        )
    cfg = TrainConfig(**payload["train_config"])
    if expect is not None:
        for name in ("base_channels", "n_resnet_blocks", "patch_head", "dropout"):
            got = getattr(cfg, name)
            want = getattr(expect, name)
            if got != want:
                raise CheckpointError(
                    f"checkpoint architecture mismatch: {name}={got}, requested {want}"
                )
    generator = Generator(cfg.generator_config())
    discriminator = Discriminator(cfg.discriminator_config())
    try:
        generator.load_state_dict(payload["generator_state"])
        discriminator.load_state_dict(payload["discriminator_state"])
    except (RuntimeError, KeyError) as e:
        raise CheckpointError(f"checkpoint parameters do not fit the architecture: {e}") from e
    return Checkpoint(
        generator=generator,
        discriminator=discriminator,
        opt_g_state=payload["opt_g_state"],
        opt_d_state=payload["opt_d_state"],
        epoch=int(payload["epoch"]),
        config=cfg,
        torch_rng_state=payload["torch_rng_state"],
    )


def write_loss_csv(history: list[EpochLosses], path) -> None:
    lines = ["epoch,loss_d,loss_g_adv,l1,loss_g_total"]
    for h in history:
        lines.append(
            "%d,%s,%s,%s,%s"
            % (h.epoch, repr(h.loss_d), repr(h.loss_g_adv), repr(h.l1), repr(h.loss_g_total))
        )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


class GanDenoiser:
    """Checkpoint-backed denoiser implementing the Denoiser protocol.

    Without a reference the decoded output spans the contaminated input's
    value range (all that exists at inference time). When the evaluation
    loop supplies the clean reference and use_reference_scale is set, the
    output is decoded to the reference's range instead, which is what the
    reported headline metrics assume.
    """

    def __init__(self, generator: Generator, use_reference_scale: bool = True):
        self.generator = generator
        self.generator.eval()
        self.use_reference_scale = use_reference_scale

    @classmethod
    def from_checkpoint(cls, path, use_reference_scale: bool = True) -> "GanDenoiser":
        ckpt = load_checkpoint(path)
        return cls(ckpt.generator, use_reference_scale=use_reference_scale)

    def denoise(self, seg: Segment, *, reference: Optional[Segment] = None) -> Segment:
        img, input_scale = encode(seg)
        x = torch.from_numpy((2.0 * img.pixels - 1.0)[None, None].astype(np.float32))
        with torch.no_grad():
            out = self.generator(x)
        out_img = from_network_range(out[0, 0].numpy().astype(np.float64))
        if reference is not None and self.use_reference_scale:
            scale = ScaleInfo(
                y_min=float(reference.samples.min()),
                y_max=float(reference.samples.max()),
            )
        else:
            scale = input_scale
        return decode(out_img, scale, kind=SegmentKind.DENOISED)
