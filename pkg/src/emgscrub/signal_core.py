"""Pure numeric primitives: RMS, SNR measurement, noise-scale solving, linear mixing.

All functions accept either `Segment` objects or plain array-likes and do their
arithmetic in float64. Everything here is stateless and safe to call from any
number of threads.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

SAMPLE_RATE_HZ = 512
SEGMENT_LEN = 1024


class SegmentKind(enum.Enum):
    CLEAN_EEG = "clean_eeg"
    EMG = "emg"
    CONTAMINATED = "contaminated"
    DENOISED = "denoised"


class UndefinedSnrError(ValueError):
    """Raised when an SNR is requested against a zero-RMS noise signal."""


@dataclass(frozen=True)
class Segment:
    """A fixed-length single-channel time series at 512 Hz.

    samples must hold exactly 1024 finite values; amplitude units are
    corpus-relative and are never converted.
    """

    samples: np.ndarray
    kind: SegmentKind
    sample_rate_hz: int = SAMPLE_RATE_HZ

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if arr.shape[0] != SEGMENT_LEN:
            raise ValueError(
                f"segment must hold exactly {SEGMENT_LEN} samples, got {arr.shape[0]}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("segment contains non-finite samples")
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return SEGMENT_LEN


@dataclass(frozen=True)
class MixRecord:
    """One (clean, EMG) pairing mixed down to a target SNR.

    noise_scale is the multiplier applied to the EMG segment so that the
    measured SNR of (clean, noise_scale * emg) hits target_snr_db.
    """

    clean_index: int
    emg_index: int
    target_snr_db: float
    noise_scale: float
    contaminated: Segment = field(repr=False)

    def __post_init__(self):
        if not (math.isfinite(self.noise_scale) and self.noise_scale > 0):
            raise ValueError(f"noise_scale must be finite and > 0, got {self.noise_scale}")
        if self.contaminated.kind is not SegmentKind.CONTAMINATED:
            raise ValueError("contaminated segment must have kind CONTAMINATED")


def _as_samples(x, name: str = "signal") -> np.ndarray:
    if isinstance(x, Segment):
        return x.samples
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def rms(s) -> float:
    """Root mean square: sqrt(mean(s_i^2)). Zero iff all samples are zero."""
    arr = _as_samples(s)
    return float(np.sqrt(np.mean(np.square(arr))))


def measure_snr_db(clean, scaled_noise) -> float:
    """SNR in dB of a clean signal against an already-scaled noise signal.

    Defined as 10 * log10(rms(clean) / rms(scaled_noise)); note the ratio of
    RMS values (not their squares) under the base-10 log.
    """
    c = _as_samples(clean, "clean")
    n = _as_samples(scaled_noise, "scaled_noise")
    if c.shape != n.shape:
        raise ValueError(f"length mismatch: {c.shape[0]} vs {n.shape[0]}")
    noise_rms = rms(n)
    if noise_rms == 0.0:
        raise UndefinedSnrError("scaled noise has zero RMS; SNR is undefined")
    clean_rms = rms(c)
    if clean_rms == 0.0:
        return float("-inf")
    return 10.0 * math.log10(clean_rms / noise_rms)


def lambda_for_snr(clean, noise, target_snr_db: float) -> float:
    """Noise multiplier that brings (clean, scale * noise) to the target SNR.

    Inverts the SNR definition: scale = rms(clean) / (rms(noise) * 10^(snr/10)).
    """
    if not math.isfinite(target_snr_db):
        raise ValueError(f"target SNR must be finite, got {target_snr_db}")
    clean_rms = rms(clean)
    noise_rms = rms(noise)
    if clean_rms == 0.0:
        raise ValueError("clean signal has zero RMS")
    if noise_rms == 0.0:
        raise ValueError("noise signal has zero RMS")
    return clean_rms / (noise_rms * 10.0 ** (target_snr_db / 10.0))


def mix(clean, noise, noise_scale: float):
    """Element-wise contamination: y_i = clean_i + noise_scale * noise_i.

    Returns a Segment of kind CONTAMINATED when both inputs are Segments,
    otherwise a plain float64 array.
    """
    if not math.isfinite(noise_scale) or noise_scale < 0:
        raise ValueError(f"noise_scale must be finite and >= 0, got {noise_scale}")
    c = _as_samples(clean, "clean")
    n = _as_samples(noise, "noise")
    if c.shape != n.shape:
        raise ValueError(f"length mismatch: {c.shape[0]} vs {n.shape[0]}")
    y = c + noise_scale * n
    if isinstance(clean, Segment) and isinstance(noise, Segment):
        return Segment(samples=y, kind=SegmentKind.CONTAMINATED)
    return y
