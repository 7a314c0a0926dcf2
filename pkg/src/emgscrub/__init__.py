"""EEG denoising toolkit: synthesize EMG-contaminated segments at controlled
SNR, train a conditional-GAN image-to-image denoiser, and evaluate with
correlation, RRMSE, and band-power metrics."""

from .signal_core import (
    SAMPLE_RATE_HZ,
    SEGMENT_LEN,
    MixRecord,
    Segment,
    SegmentKind,
    UndefinedSnrError,
    lambda_for_snr,
    measure_snr_db,
    mix,
    rms,
)

__version__ = "0.1.0"

__all__ = [
    "SAMPLE_RATE_HZ",
    "SEGMENT_LEN",
    "Segment",
    "SegmentKind",
    "MixRecord",
    "UndefinedSnrError",
    "rms",
    "measure_snr_db",
    "lambda_for_snr",
    "mix",
    "__version__",
]
