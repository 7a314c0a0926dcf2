"""Adversarial and reconstruction losses.

The discriminator minimizes -[ln d_real + ln(1 - d_fake)]; the generator's
adversarial term is the non-saturating -ln d_fake (same fixed points as
minimizing ln(1 - d_fake), healthier gradients early on). Probabilities are
clamped to [1e-7, 1 - 1e-7] before the logarithms so a saturated
discriminator cannot produce infinities. The reconstruction term is a plain
mean absolute difference, combined as adv + l1_weight * l1.
"""

from __future__ import annotations

import torch

PROB_EPS = 1e-7


def _clamped_log(p: torch.Tensor) -> torch.Tensor:
    return torch.log(p.clamp(PROB_EPS, 1.0 - PROB_EPS))


def adversarial_losses(d_real, d_fake) -> tuple[torch.Tensor, torch.Tensor]:
    """(loss_D, loss_G_adv) from discriminator outputs on real/fake pairs.

    Accepts tensors of any shape (patch heads included); each loss is the
    mean over all elements.
    """
    d_real = torch.as_tensor(d_real)
    d_fake = torch.as_tensor(d_fake)
    loss_d = -(_clamped_log(d_real).mean() + _clamped_log(1.0 - d_fake).mean())
    loss_g_adv = -_clamped_log(d_fake).mean()
    return loss_d, loss_g_adv


def generator_adversarial_loss(d_fake) -> torch.Tensor:
    """Just the -ln d_fake half of adversarial_losses, for the G update."""
    return -_clamped_log(torch.as_tensor(d_fake)).mean()


def l1_loss(generated, target) -> torch.Tensor:
    """Mean absolute difference over all pixels."""
    generated = torch.as_tensor(generated)
    target = torch.as_tensor(target)
    if generated.shape != target.shape:
        raise ValueError(
            f"shape mismatch: {tuple(generated.shape)} vs {tuple(target.shape)}"
        )
    return (generated - target).abs().mean()


def total_generator_loss(loss_g_adv, l1, l1_weight: float) -> torch.Tensor:
    """Adversarial term plus weighted reconstruction term."""
    if l1_weight < 0:
        raise ValueError(f"l1_weight must be non-negative, got {l1_weight}")
    return torch.as_tensor(loss_g_adv) + l1_weight * torch.as_tensor(l1)
