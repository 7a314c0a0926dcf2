"""Segment <-> 32x32 image conversion.

A 1024-sample segment maps row-major onto a 32x32 grid: sample i lands at
(row i // 32, column i mod 32). Pixel values are the segment min-max
normalized to [0,1]; the original (min, max) travels separately as ScaleInfo
so decode can restore physical units. The decode path first renormalizes by
the image's *own* pixel extrema, which makes it invariant to any affine
distortion the network may apply, then maps affinely onto [y_min, y_max].

Network-facing tensors live in [-1,1] (Tanh output range); the conversion is
u -> 2u - 1 with clamping on the way back.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .signal_core import SEGMENT_LEN, Segment, SegmentKind

IMAGE_SIDE = 32

assert IMAGE_SIDE * IMAGE_SIDE == SEGMENT_LEN


@dataclass(frozen=True)
class ScaleInfo:
    """The value range a decoded segment should span."""

    y_min: float
    y_max: float

    def __post_init__(self):
        if not (np.isfinite(self.y_min) and np.isfinite(self.y_max)):
            raise ValueError("ScaleInfo bounds must be finite")
        if self.y_max < self.y_min:
            raise ValueError(f"y_max {self.y_max} < y_min {self.y_min}")

    @property
    def span(self) -> float:
        return self.y_max - self.y_min


@dataclass(frozen=True)
class SegmentImage:
    """A 32x32 grid of pixel values in [0,1]."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels, dtype=np.float64)
        if arr.shape != (IMAGE_SIDE, IMAGE_SIDE):
            raise ValueError(f"pixels must be {IMAGE_SIDE}x{IMAGE_SIDE}, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("pixels contain non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError(
                f"pixels outside [0,1]: range [{arr.min()}, {arr.max()}]"
            )
        object.__setattr__(self, "pixels", arr)


def encode(seg) -> tuple[SegmentImage, ScaleInfo]:
    """Min-max normalize a segment and fold it row-major into a 32x32 image.

    A constant segment becomes a uniform 0.5 image with ScaleInfo(min == max).
    """
    samples = seg.samples if isinstance(seg, Segment) else np.asarray(seg, dtype=np.float64)
    if samples.shape != (SEGMENT_LEN,):
        raise ValueError(f"expected {SEGMENT_LEN} samples, got shape {samples.shape}")
    if not np.all(np.isfinite(samples)):
        raise ValueError("segment contains non-finite samples")
    y_min = float(samples.min())
    y_max = float(samples.max())
    if y_max == y_min:
        pixels = np.full((IMAGE_SIDE, IMAGE_SIDE), 0.5)
    else:
        pixels = ((samples - y_min) / (y_max - y_min)).reshape(IMAGE_SIDE, IMAGE_SIDE)
        # guard against float round-off nudging an endpoint past the interval
        pixels = np.clip(pixels, 0.0, 1.0)
    return SegmentImage(pixels=pixels), ScaleInfo(y_min=y_min, y_max=y_max)


def decode(
    img: SegmentImage,
    scale: ScaleInfo,
    kind: SegmentKind = SegmentKind.DENOISED,
) -> Segment:
    """Map an image back to a segment spanning [scale.y_min, scale.y_max].

    The image is first renormalized by its own extrema, so the output of a
    non-constant image always attains both endpoints exactly. A constant
    image decodes to the range midpoint.
    """
    d = img.pixels
    x_min = d.min()
    x_max = d.max()
    if x_max == x_min:
        samples = np.full(SEGMENT_LEN, 0.5 * (scale.y_min + scale.y_max))
    else:
        dt = (d - x_min) / (x_max - x_min)
        samples = (dt * scale.span + scale.y_min).reshape(SEGMENT_LEN)
    return Segment(samples=samples, kind=kind)


def to_network_range(img: SegmentImage) -> np.ndarray:
    """[0,1] pixels -> [-1,1] grid for the Tanh-output generator."""
    return 2.0 * img.pixels - 1.0


def from_network_range(grid: np.ndarray) -> SegmentImage:
    """[-1,1] network output -> [0,1] image, clamping strays first."""
    arr = np.asarray(grid, dtype=np.float64)
    if arr.shape != (IMAGE_SIDE, IMAGE_SIDE):
        raise ValueError(f"grid must be {IMAGE_SIDE}x{IMAGE_SIDE}, got {arr.shape}")
    return SegmentImage(pixels=(np.clip(arr, -1.0, 1.0) + 1.0) / 2.0)


def export_png(img: SegmentImage, path) -> None:
    """Write an 8-bit grayscale PNG; quantization is round-half-up."""
    q = np.floor(img.pixels * 255.0 + 0.5).astype(np.uint8)
    Image.fromarray(q, mode="L").save(Path(path), format="PNG")


def import_png(path) -> SegmentImage:
    """Read a 32x32 PNG back into pixel space ([0,1], 1/255 resolution).

    Color images are collapsed to one channel by averaging.
    """
    with Image.open(Path(path)) as im:
        arr = np.asarray(im, dtype=np.float64)
    if arr.ndim == 3:
        arr = arr[..., :3].mean(axis=2)
    if arr.shape != (IMAGE_SIDE, IMAGE_SIDE):
        raise ValueError(f"PNG is {arr.shape}, expected {IMAGE_SIDE}x{IMAGE_SIDE}")
    return SegmentImage(pixels=arr / 255.0)


# --- vectorized helpers used by the training/eval paths ------------------

def encode_batch(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Encode (n, 1024) samples to (n, 32, 32) pixel grids plus range vectors.

    Identical arithmetic to encode(), just without per-item object wrapping.
    Returns (pixels, y_min, y_max).
    """
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != SEGMENT_LEN:
        raise ValueError(f"expected (n, {SEGMENT_LEN}), got {arr.shape}")
    y_min = arr.min(axis=1)
    y_max = arr.max(axis=1)
    span = y_max - y_min
    flat = np.where(span == 0.0)[0]
    safe = np.where(span == 0.0, 1.0, span)
    pixels = (arr - y_min[:, None]) / safe[:, None]
    pixels[flat] = 0.5
    pixels = np.clip(pixels, 0.0, 1.0)
    return pixels.reshape(-1, IMAGE_SIDE, IMAGE_SIDE), y_min, y_max


def decode_batch(pixels: np.ndarray, y_min: np.ndarray, y_max: np.ndarray) -> np.ndarray:
    """Decode (n, 32, 32) pixel grids to (n, 1024) samples (see decode())."""
    arr = np.asarray(pixels, dtype=np.float64).reshape(-1, SEGMENT_LEN)
    y_min = np.asarray(y_min, dtype=np.float64)
    y_max = np.asarray(y_max, dtype=np.float64)
    x_min = arr.min(axis=1)
    x_max = arr.max(axis=1)
    xspan = x_max - x_min
    flat = xspan == 0.0
    safe = np.where(flat, 1.0, xspan)
    dt = (arr - x_min[:, None]) / safe[:, None]
    out = dt * (y_max - y_min)[:, None] + y_min[:, None]
    if np.any(flat):
        mids = 0.5 * (y_min + y_max)
        out[flat] = mids[flat, None]
    return out
