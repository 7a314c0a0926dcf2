"""Generator and discriminator architectures.

The generator is a resnet-style image translator sized for 32x32 inputs: a
7x7 stem, two stride-2 downsampling convolutions (64 -> 128 -> 256 channels),
a stack of residual blocks at 8x8, two transposed convolutions back up, and a
7x7 head with Tanh. Dropout inside the residual blocks is the only source of
stochasticity and is active in train mode only.

The discriminator scores a (condition, candidate) channel pair through four
stride-2 convolutions (64 -> 512) with LeakyReLU; the default head flattens
into a single fully connected logit + Sigmoid. A per-patch head (1x1
convolution + Sigmoid over the 2x2 feature map) is available behind a config
flag.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn


@dataclass(frozen=True)
class GeneratorConfig:
    in_channels: int = 1
    base_channels: int = 64
    max_channels: int = 256
    n_resnet_blocks: int = 6
    dropout: float = 0.5

    def __post_init__(self):
        if self.in_channels < 1 or self.base_channels < 1:
            raise ValueError("channel counts must be positive")
        if self.max_channels != 4 * self.base_channels:
            raise ValueError(
                f"max_channels must be 4x base (two doublings), got "
                f"{self.max_channels} vs base {self.base_channels}"
            )
        if self.n_resnet_blocks < 1:
            raise ValueError("need at least one resnet block")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0,1), got {self.dropout}")


@dataclass(frozen=True)
class DiscriminatorConfig:
    in_channels: int = 2
    base_channels: int = 64
    image_side: int = 32
    patch_head: bool = False

    def __post_init__(self):
        if self.in_channels < 1 or self.base_channels < 1:
            raise ValueError("channel counts must be positive")
        if self.image_side < 1:
            raise ValueError("image_side must be positive")

    @property
    def feature_side(self) -> int:
        """Spatial size after the four stride-2 convolutions."""
        s = self.image_side
        for _ in range(4):
            s = (s + 1) // 2
        return s


def _resnet_block(ch: int, dropout: float) -> nn.Sequential:
    layers = [nn.Conv2d(ch, ch, 3, 1, 1), nn.BatchNorm2d(ch), nn.ReLU(True)]
    if dropout > 0:
        layers.append(nn.Dropout(dropout))
    layers += [nn.Conv2d(ch, ch, 3, 1, 1), nn.BatchNorm2d(ch)]
    return nn.Sequential(*layers)


class Generator(nn.Module):
    def __init__(self, cfg: GeneratorConfig = GeneratorConfig()):
        super().__init__()
        self.cfg = cfg
        b = cfg.base_channels
        self.head = nn.Sequential(
            nn.Conv2d(cfg.in_channels, b, 7, 1, 3), nn.BatchNorm2d(b), nn.ReLU(True)
        )
        self.down1 = nn.Sequential(
            nn.Conv2d(b, 2 * b, 3, 2, 1), nn.BatchNorm2d(2 * b), nn.ReLU(True)
        )
        self.down2 = nn.Sequential(
            nn.Conv2d(2 * b, 4 * b, 3, 2, 1), nn.BatchNorm2d(4 * b), nn.ReLU(True)
        )
        self.blocks = nn.ModuleList(
            _resnet_block(4 * b, cfg.dropout) for _ in range(cfg.n_resnet_blocks)
        )
        self.up1 = nn.Sequential(
            nn.ConvTranspose2d(4 * b, 2 * b, 3, 2, 1, output_padding=1),
            nn.BatchNorm2d(2 * b),
            nn.ReLU(True),
        )
        self.up2 = nn.Sequential(
            nn.ConvTranspose2d(2 * b, b, 3, 2, 1, output_padding=1),
            nn.BatchNorm2d(b),
            nn.ReLU(True),
        )
        self.tail = nn.Sequential(nn.Conv2d(b, 1, 7, 1, 3), nn.Tanh())

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 4 or x.shape[1] != self.cfg.in_channels:
            raise ValueError(
                f"expected (n, {self.cfg.in_channels}, h, w) input, got {tuple(x.shape)}"
            )
        if x.shape[2] % 4 or x.shape[3] % 4:
            raise ValueError(f"spatial dims must be divisible by 4, got {tuple(x.shape)}")
        h = self.down2(self.down1(self.head(x)))
        for block in self.blocks:
            h = h + block(h)
        return self.tail(self.up2(self.up1(h)))


class Discriminator(nn.Module):
    def __init__(self, cfg: DiscriminatorConfig = DiscriminatorConfig()):
        super().__init__()
        self.cfg = cfg
        b = cfg.base_channels
        layers: list[nn.Module] = []
        ch = cfg.in_channels
        for i in range(4):
            out = b * 2**i
            layers.append(nn.Conv2d(ch, out, 3, 2, 1))
            if i > 0:
                layers.append(nn.BatchNorm2d(out))
            layers.append(nn.LeakyReLU(0.2, True))
            ch = out
        self.conv = nn.Sequential(*layers)
        if cfg.patch_head:
            self.head = nn.Conv2d(8 * b, 1, 1)
        else:
            self.head = nn.Linear(8 * b * cfg.feature_side**2, 1)

    def forward(self, cond: torch.Tensor, candidate: torch.Tensor) -> torch.Tensor:
        """Probability the candidate is the real clean image for `cond`.

        Returns (n, 1) with the scalar head, (n, 1, s, s) with the patch head.
        """
        if cond.shape != candidate.shape:
            raise ValueError(f"shape mismatch: {tuple(cond.shape)} vs {tuple(candidate.shape)}")
        if cond.ndim != 4 or cond.shape[2] != self.cfg.image_side:
            raise ValueError(
                f"expected (n, 1, {self.cfg.image_side}, {self.cfg.image_side}) images, "
                f"got {tuple(cond.shape)}"
            )
        h = self.conv(torch.cat([cond, candidate], dim=1))
        if self.cfg.patch_head:
            return torch.sigmoid(self.head(h))
        return torch.sigmoid(self.head(h.flatten(1)))


def init_weights(model: nn.Module) -> None:
    """Normal(0, 0.02) init for conv/linear weights, zero biases (seeded by caller)."""
    for m in model.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
            nn.init.normal_(m.weight, 0.0, 0.02)
            if m.bias is not None:
                nn.init.zeros_(m.bias)


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def expected_generator_parameters(cfg: GeneratorConfig) -> int:
    """Closed-form parameter count for the generator layer plan."""
    b = cfg.base_channels
    c_in = cfg.in_channels

    def conv(cin, cout, k):
        return cin * cout * k * k + cout

    def bn(ch):
        return 2 * ch

    total = conv(c_in, b, 7) + bn(b)                     # stem
    total += conv(b, 2 * b, 3) + bn(2 * b)               # down1
    total += conv(2 * b, 4 * b, 3) + bn(4 * b)           # down2
    per_block = 2 * (conv(4 * b, 4 * b, 3) + bn(4 * b))  # two conv+BN per block
    total += cfg.n_resnet_blocks * per_block
    total += conv(4 * b, 2 * b, 3) + bn(2 * b)           # up1 (transposed, same count)
    total += conv(2 * b, b, 3) + bn(b)                   # up2
    total += conv(b, 1, 7)                               # tail
    return total


def expected_discriminator_parameters(cfg: DiscriminatorConfig) -> int:
    """Closed-form parameter count for the discriminator layer plan."""
    b = cfg.base_channels

    def conv(cin, cout, k):
        return cin * cout * k * k + cout

    def bn(ch):
        return 2 * ch

    total = conv(cfg.in_channels, b, 3)
    total += conv(b, 2 * b, 3) + bn(2 * b)
    total += conv(2 * b, 4 * b, 3) + bn(4 * b)
    total += conv(4 * b, 8 * b, 3) + bn(8 * b)
    if cfg.patch_head:
        total += conv(8 * b, 1, 1)
    else:
        total += 8 * b * cfg.feature_side**2 + 1
    return total
