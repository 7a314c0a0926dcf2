"""Result tables and figures: metric-vs-SNR curves and PSD overlays.

Everything renders headlessly to files (SVG by default, PNG supported).
Figures are kept byte-reproducible across reruns: fixed hash salt for SVG
element ids and no embedded creation date.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .metrics import EvalResult, Psd, psd  # noqa: E402
from .signal_core import Segment  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "emgscrub"

_SAVEFIG_KW = {"metadata": {"Date": None}, "dpi": 120}


def write_global_csv(results: dict[str, EvalResult], path) -> None:
    """Global-average table: one row per evaluated model/baseline."""
    lines = ["model,acc,rrmse_t,rrmse_s,n_segments"]
    for name, res in results.items():
        lines.append(
            "%s,%s,%s,%s,%d"
            % (
                name,
                repr(res.global_acc),
                repr(res.global_rrmse_temporal),
                repr(res.global_rrmse_spectral),
                res.n_total,
            )
        )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _series(result: EvalResult):
    levels = [row.snr_level for row in result.rows]
    return (
        levels,
        [row.acc for row in result.rows],
        [row.rrmse_temporal for row in result.rows],
        [row.rrmse_spectral for row in result.rows],
    )


def render_metric_curves(
    results: dict[str, EvalResult], path, title: str = "Denoising metrics by input SNR"
) -> None:
    """Three-panel figure: ACC, temporal RRMSE, spectral RRMSE vs SNR level."""
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.6))
    panels = [("ACC", 1), ("RRMSE (temporal)", 2), ("RRMSE (spectral)", 3)]
    for ax, (label, col) in zip(axes, panels):
        for name, res in results.items():
            series = _series(res)
            ax.plot(series[0], series[col], marker="o", markersize=3, label=name)
        ax.set_xlabel("SNR (dB)")
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
    axes[0].legend(loc="best", fontsize=8)
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(Path(path), **_SAVEFIG_KW)
    plt.close(fig)


def render_psd_overlay(
    clean: Segment,
    contaminated: Segment,
    denoised: Segment,
    path,
    psd_method: str = "welch",
    label: str = "",
) -> None:
    """Overlay the PSDs of the clean/contaminated/denoised versions of a segment."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for name, seg, style in (
        ("clean", clean, "-"),
        ("contaminated", contaminated, "--"),
        ("denoised", denoised, "-."),
    ):
        p: Psd = psd(seg, method=psd_method)
        # semilog-y with a floor so all-zero bins don't blow up the log axis
        ax.semilogy(p.freqs, np.maximum(p.power, 1e-12), style, label=name, linewidth=1.1)
    ax.set_xlim(0, 120)
    ax.set_xlabel("frequency (Hz)")
    ax.set_ylabel("PSD (power/Hz)")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    ax.set_title(f"Power spectral density {label}".strip())
    fig.tight_layout()
    fig.savefig(Path(path), **_SAVEFIG_KW)
    plt.close(fig)


def render_loss_curves(history, path) -> None:
    """Per-epoch loss traces from a training run."""
    epochs = [h.epoch for h in history]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
    ax1.plot(epochs, [h.loss_d for h in history], label="discriminator")
    ax1.plot(epochs, [h.loss_g_adv for h in history], label="generator (adv)")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("loss")
    ax1.grid(True, alpha=0.3)
    ax1.legend(fontsize=8)
    ax2.plot(epochs, [h.l1 for h in history], color="tab:green")
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("L1 term")
    ax2.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(Path(path), **_SAVEFIG_KW)
    plt.close(fig)
