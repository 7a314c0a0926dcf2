"""Conditional GAN denoiser: models, losses, training loop, checkpointing."""

from .models import (
    DiscriminatorConfig,
    Discriminator,
    Generator,
    GeneratorConfig,
    count_parameters,
    expected_discriminator_parameters,
    expected_generator_parameters,
    init_weights,
)
from .losses import (
    PROB_EPS,
    adversarial_losses,
    generator_adversarial_loss,
    l1_loss,
    total_generator_loss,
)
from .training import (
    CHECKPOINT_FORMAT,
    CHECKPOINT_VERSION,
    Checkpoint,
    CheckpointError,
    EpochLosses,
    GanDenoiser,
    NonFiniteLossError,
    PairedImages,
    TrainConfig,
    load_checkpoint,
    paired_images_from,
    save_checkpoint,
    train,
    write_loss_csv,
)

__all__ = [
    "GeneratorConfig",
    "DiscriminatorConfig",
    "Generator",
    "Discriminator",
    "init_weights",
    "count_parameters",
    "expected_generator_parameters",
    "expected_discriminator_parameters",
    "PROB_EPS",
    "adversarial_losses",
    "generator_adversarial_loss",
    "l1_loss",
    "total_generator_loss",
    "TrainConfig",
    "PairedImages",
    "paired_images_from",
    "train",
    "CHECKPOINT_FORMAT",
    "CHECKPOINT_VERSION",
    "Checkpoint",
    "CheckpointError",
    "EpochLosses",
    "NonFiniteLossError",
    "save_checkpoint",
    "load_checkpoint",
    "GanDenoiser",
    "write_loss_csv",
]
