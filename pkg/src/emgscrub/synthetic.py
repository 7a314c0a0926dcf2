"""Synthetic stand-in corpora for tests, demos, and full-cardinality dry runs.

Real recordings are out of scope here; these generators produce segments with
the right gross statistics instead:

* clean EEG stand-ins are Gaussian band mixtures whose per-band power shares
  follow the canonical resting-EEG profile (delta 0.30, theta 0.18, alpha
  0.36, beta 0.13, gamma 0.06), normalized to unit RMS;
* EMG stand-ins are broadband noise concentrated in 20-250 Hz with a small
  out-of-band floor, also unit RMS.

Run ``python -m emgscrub.synthetic --out DIR --count N --seed S`` to write a
matched pair of corpora (eeg.f32 / emg.f32 + manifests) for the CLI to chew
on.
"""

from __future__ import annotations

import numpy as np

from .dataset import Corpus, ContaminatedCorpus, generate_contaminated
from .signal_core import SAMPLE_RATE_HZ, SEGMENT_LEN, SegmentKind

# (low Hz, high Hz, power share) for the clean stand-in
EEG_BAND_SHARES = [
    (1.0, 4.0, 0.30),
    (4.0, 8.0, 0.18),
    (8.0, 13.0, 0.36),
    (13.0, 30.0, 0.13),
    (30.0, 80.0, 0.06),
]

EMG_BAND_HZ = (20.0, 250.0)
EMG_FLOOR = 0.02

# distinct sub-stream tags so eeg/emg draws never overlap for one seed
_STREAM_EEG = 101
_STREAM_EMG = 102


def _random_band_signal(rng: np.random.Generator, n: int, amp: np.ndarray) -> np.ndarray:
    """n unit-RMS signals with spectral amplitude profile `amp` over rfft bins."""
    spec = amp * (
        rng.standard_normal((n, amp.size)) + 1j * rng.standard_normal((n, amp.size))
    )
    x = np.fft.irfft(spec, n=SEGMENT_LEN, axis=1)
    return x / np.sqrt(np.mean(np.square(x), axis=1, keepdims=True))


def make_clean_corpus(n: int, seed: int) -> Corpus:
    """n synthetic clean-EEG segments (unit RMS, resting-profile band powers)."""
    if n <= 0:
        raise ValueError(f"count must be positive, got {n}")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), _STREAM_EEG]))
    freqs = np.fft.rfftfreq(SEGMENT_LEN, 1.0 / SAMPLE_RATE_HZ)
    amp = np.zeros_like(freqs)
    for lo, hi, share in EEG_BAND_SHARES:
        m = (freqs >= lo) & (freqs < hi)
        amp[m] = np.sqrt(share / m.sum())
    samples = _random_band_signal(rng, n, amp)
    return Corpus(
        samples=samples,
        kind=SegmentKind.CLEAN_EEG,
        source_manifest={"synthetic": "eeg", "seed": int(seed), "n_segments": n},
    )


def make_emg_corpus(n: int, seed: int) -> Corpus:
    """n synthetic EMG segments (broadband 20-250 Hz, unit RMS)."""
    if n <= 0:
        raise ValueError(f"count must be positive, got {n}")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), _STREAM_EMG]))
    freqs = np.fft.rfftfreq(SEGMENT_LEN, 1.0 / SAMPLE_RATE_HZ)
    amp = np.where((freqs >= EMG_BAND_HZ[0]) & (freqs <= EMG_BAND_HZ[1]), 1.0, EMG_FLOOR)
    samples = _random_band_signal(rng, n, amp)
    return Corpus(
        samples=samples,
        kind=SegmentKind.EMG,
        source_manifest={"synthetic": "emg", "seed": int(seed), "n_segments": n},
    )


def make_paired_fixture(
    n_pairs: int, snr_levels: list[int], seed: int
) -> tuple[Corpus, ContaminatedCorpus]:
    """n_pairs synthetic (clean, emg) pairs mixed at every requested level.

    Total records = n_pairs * len(snr_levels), level-major, one line call for
    tests and demos.
    """
    clean = make_clean_corpus(n_pairs, seed)
    emg = make_emg_corpus(n_pairs, seed)
    return clean, generate_contaminated(clean, emg, list(snr_levels), seed)


def main(argv=None) -> int:
    import argparse
    from pathlib import Path

    from .dataset import save_corpus

    parser = argparse.ArgumentParser(
        prog="python -m emgscrub.synthetic",
        description="Write synthetic stand-in EEG and EMG corpora.",
    )
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--count", type=int, default=4514, help="segments per corpus")
    parser.add_argument("--seed", type=int, required=True)
    args = parser.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    eeg = make_clean_corpus(args.count, args.seed)
    emg = make_emg_corpus(args.count, args.seed)
    m1 = save_corpus(eeg, out / "eeg.f32")
    m2 = save_corpus(emg, out / "emg.f32")
    print(f"wrote {m1['path']} ({m1['n_segments']} segments)")
    print(f"wrote {m2['path']} ({m2['n_segments']} segments)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
