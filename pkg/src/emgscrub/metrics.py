"""Denoising quality metrics: ACC, temporal/spectral RRMSE, PSD, band powers.

Conventions fixed here so every caller (and the test oracles) agree:

* acc is the population correlation (1/N covariance and variances), clamped
  into [-1, 1] against rounding;
* rrmse_temporal(f, x) = rms(f - x) / rms(x);
* psd defaults to Welch with 256-sample Hann windows at 50% overlap, then
  renormalizes so that sum(power) * df equals the signal's mean square
  exactly (the Hann window otherwise leaks a ~3% deficit);
* rrmse_spectral is the rms of the PSD difference over the rms of the
  reference PSD, both densities computed with identical settings;
* band powers integrate half-open intervals [1,4), [4,8), [8,13), [13,30),
  [30,80) Hz and normalize by the [1,80) total.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Protocol, runtime_checkable

import numpy as np
from scipy import signal as sps

from .dataset import ContaminatedCorpus, Corpus, DataValidationError
from .signal_core import SAMPLE_RATE_HZ, SEGMENT_LEN, Segment, SegmentKind, rms

PSD_WELCH = "welch"
PSD_PERIODOGRAM = "periodogram"

WELCH_NPERSEG = 256
WELCH_NOVERLAP = 128

BAND_EDGES_HZ = {
    "delta": (1.0, 4.0),
    "theta": (4.0, 8.0),
    "alpha": (8.0, 13.0),
    "beta": (13.0, 30.0),
    "gamma": (30.0, 80.0),
}
BAND_TOTAL_HZ = (1.0, 80.0)


class UndefinedCorrelationError(ValueError):
    """Correlation requested against a zero-variance signal."""


class ZeroReferenceError(ValueError):
    """A relative metric was asked to normalize by an all-zero reference."""


def _as_samples(x) -> np.ndarray:
    if isinstance(x, Segment):
        return x.samples
    return np.asarray(x, dtype=np.float64)


def acc(f_y, x) -> float:
    """Population correlation coefficient between two equal-length signals."""
    f = _as_samples(f_y)
    g = _as_samples(x)
    if f.shape != g.shape:
        raise ValueError(f"length mismatch: {f.shape} vs {g.shape}")
    fc = f - f.mean()
    gc = g - g.mean()
    var_f = np.mean(fc * fc)
    var_g = np.mean(gc * gc)
    if var_f == 0.0 or var_g == 0.0:
        raise UndefinedCorrelationError("correlation undefined for zero-variance input")
    r = np.mean(fc * gc) / np.sqrt(var_f * var_g)
    return float(min(1.0, max(-1.0, r)))


def rrmse_temporal(f_y, x) -> float:
    """rms(f_y - x) / rms(x)."""
    f = _as_samples(f_y)
    g = _as_samples(x)
    if f.shape != g.shape:
        raise ValueError(f"length mismatch: {f.shape} vs {g.shape}")
    denom = rms(g)
    if denom == 0.0:
        raise ZeroReferenceError("rrmse_temporal reference has zero RMS")
    return float(rms(f - g) / denom)


@dataclass(frozen=True)
class Psd:
    """One-sided power spectral density with the estimator settings attached."""

    freqs: np.ndarray
    power: np.ndarray
    window: str
    nperseg: int
    noverlap: int

    def __post_init__(self):
        freqs = np.asarray(self.freqs, dtype=np.float64)
        power = np.asarray(self.power, dtype=np.float64)
        if freqs.shape != power.shape or freqs.ndim != 1:
            raise ValueError("freqs/power must be matching 1-D arrays")
        if freqs[0] != 0.0 or freqs[-1] != SAMPLE_RATE_HZ / 2:
            raise ValueError(
                f"freqs must span 0..{SAMPLE_RATE_HZ // 2} Hz, got "
                f"[{freqs[0]}, {freqs[-1]}]"
            )
        if np.any(np.diff(freqs) <= 0.0):
            raise ValueError("freqs must be strictly increasing")
        if np.any(power < 0.0) or not np.all(np.isfinite(power)):
            raise ValueError("power must be finite and non-negative")
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "power", power)

    @property
    def df(self) -> float:
        return float(self.freqs[1] - self.freqs[0])

    def total_power(self) -> float:
        return float(np.sum(self.power) * self.df)


def psd(seg, method: str = PSD_WELCH) -> Psd:
    """Estimate the PSD of a 1024-sample segment at 512 Hz.

    The raw estimate is rescaled so the integral of power over frequency
    equals the signal's mean square exactly (a zero signal stays all-zero).
    """
    x = _as_samples(seg)
    if x.shape != (SEGMENT_LEN,):
        raise ValueError(f"expected {SEGMENT_LEN} samples, got shape {x.shape}")
    if method == PSD_WELCH:
        freqs, power = sps.welch(
            x,
            fs=SAMPLE_RATE_HZ,
            window="hann",
            nperseg=WELCH_NPERSEG,
            noverlap=WELCH_NOVERLAP,
            detrend=False,
            scaling="density",
        )
        window, nperseg, noverlap = "hann", WELCH_NPERSEG, WELCH_NOVERLAP
    elif method == PSD_PERIODOGRAM:
        freqs, power = sps.periodogram(
            x,
            fs=SAMPLE_RATE_HZ,
            window="boxcar",
            detrend=False,
            scaling="density",
        )
        window, nperseg, noverlap = "boxcar", SEGMENT_LEN, 0
    else:
        raise ValueError(f"unknown PSD method {method!r}")
    power = np.maximum(power, 0.0)
    df = freqs[1] - freqs[0]
    mean_square = float(np.mean(x * x))
    raw_total = float(np.sum(power) * df)
    if raw_total > 0.0:
        power = power * (mean_square / raw_total)
    return Psd(freqs=freqs, power=power, window=window, nperseg=nperseg, noverlap=noverlap)


def rrmse_spectral(
    f_y,
    x,
    method: str = PSD_WELCH,
    band_limit_hz: Optional[tuple[float, float]] = None,
) -> float:
    """rms of the PSD difference over rms of the reference PSD.

    All one-sided bins enter by default; band_limit_hz=(1, 80) restricts the
    comparison to that half-open frequency range.
    """
    pf = psd(f_y, method=method)
    px = psd(x, method=method)
    yp, xp = pf.power, px.power
    if band_limit_hz is not None:
        lo, hi = band_limit_hz
        mask = (pf.freqs >= lo) & (pf.freqs < hi)
        yp, xp = yp[mask], xp[mask]
    denom = np.sqrt(np.mean(xp * xp))
    if denom == 0.0:
        raise ZeroReferenceError("rrmse_spectral reference PSD is all zero")
    return float(np.sqrt(np.mean((yp - xp) ** 2)) / denom)


@dataclass(frozen=True)
class BandPowers:
    """Relative power per canonical EEG band; components sum to one."""

    delta: float
    theta: float
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        for name, v in self.as_dict().items():
            if not np.isfinite(v) or v < 0.0 or v > 1.0:
                raise ValueError(f"band ratio {name}={v} outside [0,1]")
            object.__setattr__(self, name, float(v))  # plain floats, so repr() is clean
        total = sum(self.as_dict().values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"band ratios sum to {total}, expected 1")

    def as_dict(self) -> dict[str, float]:
        return {
            "delta": self.delta,
            "theta": self.theta,
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma": self.gamma,
        }


def band_ratios(p: Psd) -> BandPowers:
    """Integrate the PSD over the five bands and normalize by the 1-80 Hz total."""
    df = p.df

    def band_power(lo: float, hi: float) -> float:
        mask = (p.freqs >= lo) & (p.freqs < hi)
        return float(np.sum(p.power[mask]) * df)

    total = band_power(*BAND_TOTAL_HZ)
    if total == 0.0:
        raise ZeroReferenceError("no power in the 1-80 Hz range")
    parts = {name: band_power(lo, hi) / total for name, (lo, hi) in BAND_EDGES_HZ.items()}
    return BandPowers(**parts)


@dataclass(frozen=True)
class MetricsRow:
    """Mean metrics over every test pair at one SNR level."""

    snr_level: int
    acc: float
    rrmse_temporal: float
    rrmse_spectral: float
    n_segments: int

    def __post_init__(self):
        if self.n_segments <= 0:
            raise ValueError("n_segments must be positive")
        if not -1.0 <= self.acc <= 1.0:
            raise ValueError(f"acc {self.acc} outside [-1,1]")


@runtime_checkable
class Denoiser(Protocol):
    """Anything that maps a contaminated segment to a denoised one.

    `reference` is an optional clean segment some denoisers can exploit for
    output scaling during evaluation; implementations must accept (and may
    ignore) the keyword.
    """

    def denoise(self, seg: Segment, *, reference: Optional[Segment] = None) -> Segment:
        ...


class IdentityDenoiser:
    """Pass-through baseline: the 'denoised' signal is the input unchanged."""

    def denoise(self, seg: Segment, *, reference: Optional[Segment] = None) -> Segment:
        return Segment(samples=seg.samples.copy(), kind=SegmentKind.DENOISED)


@dataclass
class EvalResult:
    """Per-level rows, global means, band-power table, and per-pair detail."""

    rows: list[MetricsRow]
    global_acc: float
    global_rrmse_temporal: float
    global_rrmse_spectral: float
    n_total: int
    band_table: dict[str, BandPowers]
    detail: dict[str, np.ndarray] = field(default_factory=dict)


def evaluate(
    denoiser: Denoiser,
    test_corpus: ContaminatedCorpus,
    clean_ref: Corpus,
    *,
    psd_method: str = PSD_WELCH,
    pass_reference: bool = True,
) -> EvalResult:
    """Run a denoiser over every test record and aggregate metrics per level.

    Aggregation is a plain mean in record order, so results do not depend on
    worker count or scheduling. Set pass_reference=False to withhold the
    clean segment from the denoiser (pure-inference scaling).
    """
    n = test_corpus.count
    if n == 0:
        raise DataValidationError("test corpus is empty")
    max_idx = int(test_corpus.clean_indices.max())
    if max_idx >= clean_ref.count:
        raise DataValidationError(
            f"record references clean segment {max_idx} but corpus holds {clean_ref.count}"
        )

    acc_v = np.empty(n)
    rrt_v = np.empty(n)
    rrs_v = np.empty(n)
    bands = {k: np.zeros(5) for k in ("clean", "contaminated", "denoised")}

    for i in range(n):
        contaminated = Segment(test_corpus.samples[i].copy(), SegmentKind.CONTAMINATED)
        clean = clean_ref.segment(int(test_corpus.clean_indices[i]))
        try:
            denoised = denoiser.denoise(
                contaminated, reference=clean if pass_reference else None
            )
            acc_v[i] = acc(denoised, clean)
            rrt_v[i] = rrmse_temporal(denoised, clean)
            rrs_v[i] = rrmse_spectral(denoised, clean, method=psd_method)
            for key, seg in (
                ("clean", clean),
                ("contaminated", contaminated),
                ("denoised", denoised),
            ):
                bp = band_ratios(psd(seg, method=psd_method))
                bands[key] += np.array(list(bp.as_dict().values()))
        except (ValueError, RuntimeError) as e:
            raise type(e)(f"record {i} (snr {test_corpus.target_snr_db[i]:g} dB): {e}") from e

    rows = []
    for level in sorted(test_corpus.snr_levels):
        idx = test_corpus.level_indices(level)
        if idx.size == 0:
            continue
        rows.append(
            MetricsRow(
                snr_level=int(level),
                acc=float(acc_v[idx].mean()),
                rrmse_temporal=float(rrt_v[idx].mean()),
                rrmse_spectral=float(rrs_v[idx].mean()),
                n_segments=int(idx.size),
            )
        )

    band_table = {
        key: BandPowers(*(vec / vec.sum())) for key, vec in bands.items()
    }
    return EvalResult(
        rows=rows,
        global_acc=float(acc_v.mean()),
        global_rrmse_temporal=float(rrt_v.mean()),
        global_rrmse_spectral=float(rrs_v.mean()),
        n_total=n,
        band_table=band_table,
        detail={
            "snr_db": test_corpus.target_snr_db.copy(),
            "segment_id": np.arange(n, dtype=np.int64),
            "acc": acc_v,
            "rrmse_t": rrt_v,
            "rrmse_s": rrs_v,
        },
    )


DETAIL_COLUMNS = ["snr_db", "segment_id", "acc", "rrmse_t", "rrmse_s"]


def write_detail_csv(result: EvalResult, path) -> None:
    """Per-pair metrics, one row per test record, fixed column order."""
    d = result.detail
    lines = [",".join(DETAIL_COLUMNS)]
    for i in range(result.n_total):
        lines.append(
            "%g,%d,%s,%s,%s"
            % (
                d["snr_db"][i],
                d["segment_id"][i],
                repr(float(d["acc"][i])),
                repr(float(d["rrmse_t"][i])),
                repr(float(d["rrmse_s"][i])),
            )
        )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_summary_csv(result: EvalResult, path) -> None:
    """Per-level means plus an `all` row with the global aggregation."""
    lines = ["snr_db,n_segments,acc,rrmse_t,rrmse_s"]
    for row in result.rows:
        lines.append(
            "%d,%d,%s,%s,%s"
            % (
                row.snr_level,
                row.n_segments,
                repr(row.acc),
                repr(row.rrmse_temporal),
                repr(row.rrmse_spectral),
            )
        )
    lines.append(
        "all,%d,%s,%s,%s"
        % (
            result.n_total,
            repr(result.global_acc),
            repr(result.global_rrmse_temporal),
            repr(result.global_rrmse_spectral),
        )
    )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_band_csv(result: EvalResult, path) -> None:
    """Band-ratio table: one row per signal kind, one column per band."""
    lines = ["signal,delta,theta,alpha,beta,gamma"]
    for key in ("clean", "contaminated", "denoised"):
        bp = result.band_table[key]
        lines.append(
            key + "," + ",".join(repr(v) for v in bp.as_dict().values())
        )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
