"""Corpus ingestion, expansion, splitting, contamination, and persistence.

Storage layout is deliberately language-neutral:

* an input corpus is a raw little-endian float32 payload (``<name>.f32``)
  with a JSON manifest sidecar (``<name>.f32.json``), or a CSV file with one
  1024-column row per segment for small fixtures;
* a contaminated corpus is a directory holding ``samples.f64`` (little-endian
  float64, one row per record), ``records.csv`` (indices, target SNR, noise
  scale) and ``manifest.json`` with checksums and full provenance.

Contaminated samples are stored as float64 so that a saved corpus reloads
bit-exactly and the mixing identity (contaminated - clean == scale * emg)
survives the round trip at float64 precision.

All randomness is derived from (seed, stream tag, item index) so results never
depend on execution order or worker count.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .signal_core import (
    SAMPLE_RATE_HZ,
    SEGMENT_LEN,
    Segment,
    SegmentKind,
    MixRecord,
    lambda_for_snr,
)

RAW_F32 = "RawF32LE"
RAW_F64 = "RawF64LE"
CSV_FORMAT = "Csv"

# stream tags keep the (seed, tag, index) derivations for distinct purposes apart
_STREAM_EXPAND = 1
_STREAM_SPLIT = 2


class DataValidationError(ValueError):
    """Input data violates a declared shape, count, or finiteness constraint."""


class CorruptCorpusError(RuntimeError):
    """A stored corpus fails its checksum or size bookkeeping."""


def _sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _check_seed(seed: int) -> int:
    if not isinstance(seed, (int, np.integer)) or seed < 0:
        raise ValueError(f"seed must be a non-negative integer, got {seed!r}")
    return int(seed)


def _item_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, stream, index]))


def derive_seed(master: int, label: str) -> int:
    """A child seed that is a pure function of (master, label).

    Pipeline stages (EEG expansion vs EMG expansion, EEG shuffle vs EMG
    shuffle, ...) get independent streams this way while staying reproducible
    from one user-facing seed.
    """
    master = _check_seed(master)
    tag = int.from_bytes(hashlib.sha256(label.encode()).digest()[:4], "big")
    return int(np.random.SeedSequence([master, tag]).generate_state(1)[0])


@dataclass
class Corpus:
    """An ordered collection of equal-length segments of a single kind.

    samples is a (count, 1024) float64 array; individual Segment views are
    materialized on demand.
    """

    samples: np.ndarray
    kind: SegmentKind
    source_manifest: dict = field(default_factory=dict)

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != SEGMENT_LEN:
            raise DataValidationError(
                f"corpus samples must be (n, {SEGMENT_LEN}), got {arr.shape}"
            )
        if arr.shape[0] == 0:
            raise DataValidationError("corpus is empty")
        if not np.all(np.isfinite(arr)):
            raise DataValidationError("corpus contains non-finite samples")
        self.samples = arr

    @property
    def count(self) -> int:
        return self.samples.shape[0]

    def __len__(self) -> int:
        return self.count

    def segment(self, i: int) -> Segment:
        return Segment(samples=self.samples[i].copy(), kind=self.kind)

    def __iter__(self):
        for i in range(self.count):
            yield self.segment(i)


@dataclass(frozen=True)
class SplitPlan:
    """Deterministic train/test partition sizes plus the shuffle seed."""

    train_count: int
    test_count: int
    seed: int
    shuffle: bool = True

    def __post_init__(self):
        if self.train_count <= 0 or self.test_count <= 0:
            raise DataValidationError(
                f"split counts must be positive, got {self.train_count}/{self.test_count}"
            )
        _check_seed(self.seed)


@dataclass
class ContaminatedCorpus:
    """All mix records for one split, stored column-wise for speed.

    Record order is level-major: for each SNR level in snr_levels, one record
    per (clean, emg) index pair in corpus order.
    """

    samples: np.ndarray          # (n_records, 1024) float64 contaminated signals
    clean_indices: np.ndarray    # (n_records,) int64 into the source clean corpus
    emg_indices: np.ndarray      # (n_records,) int64 into the source EMG corpus
    target_snr_db: np.ndarray    # (n_records,) float64
    noise_scale: np.ndarray      # (n_records,) float64
    snr_levels: list[int]
    split: str = "train"
    manifest: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.samples.shape[0]
        for name in ("clean_indices", "emg_indices", "target_snr_db", "noise_scale"):
            if getattr(self, name).shape[0] != n:
                raise DataValidationError(f"{name} length disagrees with sample count")
        levels = sorted(float(s) for s in self.snr_levels)
        if len(set(levels)) != len(levels):
            raise DataValidationError(f"duplicate SNR levels in {self.snr_levels}")
        present, counts = np.unique(self.target_snr_db, return_counts=True)
        if not set(present).issubset(set(levels)):
            raise DataValidationError("record target SNR outside declared snr_levels")
        # every declared level carries the same number of records (one per pair)
        if list(present) != levels or len(set(counts)) != 1:
            raise DataValidationError(
                f"records unevenly distributed over levels: {dict(zip(present, counts))}"
            )

    @property
    def count(self) -> int:
        return self.samples.shape[0]

    def __len__(self) -> int:
        return self.count

    def record(self, i: int) -> MixRecord:
        return MixRecord(
            clean_index=int(self.clean_indices[i]),
            emg_index=int(self.emg_indices[i]),
            target_snr_db=float(self.target_snr_db[i]),
            noise_scale=float(self.noise_scale[i]),
            contaminated=Segment(self.samples[i].copy(), SegmentKind.CONTAMINATED),
        )

    def records(self):
        for i in range(self.count):
            yield self.record(i)

    def level_indices(self, level: float) -> np.ndarray:
        return np.nonzero(self.target_snr_db == float(level))[0]


def _corpus_manifest(fmt: str, n: int, checksum: str) -> dict:
    return {
        "format": fmt,
        "n_segments": n,
        "segment_len": SEGMENT_LEN,
        "sample_rate_hz": SAMPLE_RATE_HZ,
        "checksum_sha256": checksum,
    }


def manifest_path_for(payload: Path) -> Path:
    return Path(str(payload) + ".json")


def load_corpus(path, fmt: str, kind: SegmentKind) -> Corpus:
    """Load a corpus from disk.

    RawF32LE expects a manifest sidecar declaring n_segments and segment_len;
    CSV infers the count from the rows. Checksums, sizes, and finiteness are
    all verified before the corpus is accepted.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"corpus payload not found: {path}")
    if fmt == RAW_F32:
        mpath = manifest_path_for(path)
        if not mpath.exists():
            raise FileNotFoundError(f"corpus manifest not found: {mpath}")
        manifest = json.loads(mpath.read_text())
        n = int(manifest["n_segments"])
        seg_len = int(manifest["segment_len"])
        if seg_len != SEGMENT_LEN:
            raise DataValidationError(
                f"manifest declares segment_len {seg_len}, expected {SEGMENT_LEN}"
            )
        payload = path.read_bytes()
        expected = n * seg_len * 4
        if len(payload) != expected:
            raise DataValidationError(
                f"payload holds {len(payload)} bytes but manifest declares "
                f"{n} x {seg_len} float32 ({expected} bytes)"
            )
        declared = manifest.get("checksum_sha256")
        if declared and declared != _sha256_bytes(payload):
            raise CorruptCorpusError(f"checksum mismatch for {path}")
        arr = np.frombuffer(payload, dtype="<f4").reshape(n, seg_len).astype(np.float64)
    elif fmt == CSV_FORMAT:
        rows = []
        with open(path, newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row:
                    continue
                if len(row) != SEGMENT_LEN:
                    raise DataValidationError(
                        f"{path}:{lineno}: expected {SEGMENT_LEN} columns, got {len(row)}"
                    )
                rows.append([float(v) for v in row])
        if not rows:
            raise DataValidationError(f"CSV corpus {path} holds no rows")
        arr = np.asarray(rows, dtype=np.float64)
        manifest = _corpus_manifest(CSV_FORMAT, arr.shape[0], _sha256_file(path))
    else:
        raise ValueError(f"unknown corpus format {fmt!r}")
    if not np.all(np.isfinite(arr)):
        raise DataValidationError(f"corpus {path} contains non-finite values")
    manifest = dict(manifest)
    manifest["path"] = str(path)
    return Corpus(samples=arr, kind=kind, source_manifest=manifest)


def save_corpus(corpus: Corpus, path, fmt: str = RAW_F32) -> dict:
    """Write a corpus and return its manifest (also written for RawF32LE)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == RAW_F32:
        payload = corpus.samples.astype("<f4").tobytes()
        path.write_bytes(payload)
        manifest = _corpus_manifest(RAW_F32, corpus.count, _sha256_bytes(payload))
        manifest_path_for(path).write_text(json.dumps(manifest, indent=2) + "\n")
    elif fmt == CSV_FORMAT:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for row in corpus.samples:
                writer.writerow([repr(float(v)) for v in row])
        manifest = _corpus_manifest(CSV_FORMAT, corpus.count, _sha256_file(path))
    else:
        raise ValueError(f"unknown corpus format {fmt!r}")
    manifest["path"] = str(path)
    return manifest


def expand_corpus(corpus: Corpus, target: int, seed: int) -> Corpus:
    """Pad a corpus to `target` segments by resampling its own entries.

    The first corpus.count rows are the originals in order; each appended row
    is drawn uniformly with replacement using its own (seed, index) stream.
    """
    seed = _check_seed(seed)
    if target < corpus.count:
        raise DataValidationError(
            f"expansion target {target} is below corpus size {corpus.count}"
        )
    if target == corpus.count:
        return Corpus(corpus.samples.copy(), corpus.kind, dict(corpus.source_manifest))
    extra = np.empty(target - corpus.count, dtype=np.int64)
    for j in range(extra.size):
        extra[j] = _item_rng(seed, _STREAM_EXPAND, j).integers(0, corpus.count)
    samples = np.concatenate([corpus.samples, corpus.samples[extra]], axis=0)
    manifest = dict(corpus.source_manifest)
    manifest["expanded_from"] = corpus.count
    manifest["expanded_to"] = int(target)
    manifest["expansion_seed"] = seed
    manifest["n_segments"] = int(target)
    return Corpus(samples=samples, kind=corpus.kind, source_manifest=manifest)


def split_corpus(corpus: Corpus, plan: SplitPlan) -> tuple[Corpus, Corpus]:
    """Partition a corpus into disjoint train/test corpora per the plan."""
    if plan.train_count + plan.test_count != corpus.count:
        raise DataValidationError(
            f"plan totals {plan.train_count + plan.test_count} but corpus holds {corpus.count}"
        )
    if plan.shuffle:
        order = _item_rng(plan.seed, _STREAM_SPLIT, 0).permutation(corpus.count)
    else:
        order = np.arange(corpus.count)
    train_idx = order[: plan.train_count]
    test_idx = order[plan.train_count :]

    def _sub(indices: np.ndarray, name: str) -> Corpus:
        manifest = dict(corpus.source_manifest)
        manifest["split"] = name
        manifest["split_seed"] = plan.seed
        manifest["split_shuffle"] = plan.shuffle
        manifest["n_segments"] = int(indices.size)
        return Corpus(corpus.samples[indices].copy(), corpus.kind, manifest)

    return _sub(train_idx, "train"), _sub(test_idx, "test")


def generate_contaminated(
    eeg: Corpus,
    emg: Corpus,
    snr_levels: list[int],
    seed: int,
    split: str = "train",
    level_bounds: tuple[int, int] | None = (-7, 2),
) -> ContaminatedCorpus:
    """Mix index-aligned (eeg[i], emg[i]) pairs at every requested SNR level.

    Produces eeg.count * len(snr_levels) records in level-major order. The
    pairing is purely positional; the seed is recorded for provenance (the
    mixing itself is deterministic).
    """
    seed = _check_seed(seed)
    if eeg.count != emg.count:
        raise DataValidationError(
            f"corpus counts differ: {eeg.count} EEG vs {emg.count} EMG"
        )
    if not snr_levels:
        raise DataValidationError("snr_levels is empty")
    if level_bounds is not None:
        lo, hi = level_bounds
        bad = [s for s in snr_levels if not lo <= s <= hi]
        if bad:
            raise DataValidationError(
                f"SNR levels {bad} outside allowed range [{lo}, {hi}]"
            )

    n = eeg.count
    eeg_rms = np.sqrt(np.mean(np.square(eeg.samples), axis=1))
    emg_rms = np.sqrt(np.mean(np.square(emg.samples), axis=1))
    for name, arr in (("EEG", eeg_rms), ("EMG", emg_rms)):
        zeros = np.nonzero(arr == 0.0)[0]
        if zeros.size:
            raise DataValidationError(f"{name} segment {zeros[0]} has zero RMS")

    blocks, cleans, emgs, targets, scales = [], [], [], [], []
    idx = np.arange(n, dtype=np.int64)
    for level in snr_levels:
        scale = eeg_rms / (emg_rms * 10.0 ** (level / 10.0))
        blocks.append(eeg.samples + scale[:, None] * emg.samples)
        cleans.append(idx)
        emgs.append(idx)
        targets.append(np.full(n, float(level)))
        scales.append(scale)

    manifest = {
        "snr_levels": [int(s) for s in snr_levels],
        "seed": seed,
        "split": split,
        "eeg_manifest": dict(eeg.source_manifest),
        "emg_manifest": dict(emg.source_manifest),
    }
    return ContaminatedCorpus(
        samples=np.concatenate(blocks, axis=0),
        clean_indices=np.concatenate(cleans),
        emg_indices=np.concatenate(emgs),
        target_snr_db=np.concatenate(targets),
        noise_scale=np.concatenate(scales),
        snr_levels=[int(s) for s in snr_levels],
        split=split,
        manifest=manifest,
    )


def stratified_subset(cc: ContaminatedCorpus, n_total: int) -> ContaminatedCorpus:
    """A deterministic subset with equal per-level counts and distinct pairs.

    Level block j contributes its records as a diagonal slice (offset by
    j * per within the block), so across levels the subset covers distinct
    clean segments whenever the source corpus is large enough. No randomness
    involved; the result is a pure function of the input.
    """
    levels = sorted(cc.snr_levels)
    if n_total <= 0 or n_total % len(levels):
        raise DataValidationError(
            f"subset size {n_total} not a positive multiple of {len(levels)} levels"
        )
    per = n_total // len(levels)
    picks = []
    for j, level in enumerate(levels):
        idx = cc.level_indices(level)
        if per > idx.size:
            raise DataValidationError(
                f"level {level} has {idx.size} records, need {per}"
            )
        take = (np.arange(per) + j * per) % idx.size
        picks.append(idx[take])
    pick = np.concatenate(picks)
    manifest = dict(cc.manifest)
    manifest["subset_of"] = cc.count
    manifest["subset_size"] = int(n_total)
    return ContaminatedCorpus(
        samples=cc.samples[pick].copy(),
        clean_indices=cc.clean_indices[pick].copy(),
        emg_indices=cc.emg_indices[pick].copy(),
        target_snr_db=cc.target_snr_db[pick].copy(),
        noise_scale=cc.noise_scale[pick].copy(),
        snr_levels=list(cc.snr_levels),
        split=cc.split,
        manifest=manifest,
    )


_RECORD_COLUMNS = ["record_id", "clean_index", "emg_index", "target_snr_db", "noise_scale"]


def save_contaminated(cc: ContaminatedCorpus, out_dir) -> dict:
    """Persist a contaminated corpus as samples.f64 + records.csv + manifest.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    payload = cc.samples.astype("<f8").tobytes()
    (out_dir / "samples.f64").write_bytes(payload)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_RECORD_COLUMNS)
    for i in range(cc.count):
        writer.writerow(
            [
                i,
                int(cc.clean_indices[i]),
                int(cc.emg_indices[i]),
                repr(float(cc.target_snr_db[i])),
                repr(float(cc.noise_scale[i])),
            ]
        )
    records_text = buf.getvalue()
    (out_dir / "records.csv").write_bytes(records_text.encode())

    manifest = dict(cc.manifest)
    manifest.update(
        {
            "format": RAW_F64,
            "n_records": cc.count,
            "segment_len": SEGMENT_LEN,
            "sample_rate_hz": SAMPLE_RATE_HZ,
            "snr_levels": [int(s) for s in cc.snr_levels],
            "split": cc.split,
            "checksum_sha256": _sha256_bytes(payload),
            "records_checksum_sha256": _sha256_bytes(records_text.encode()),
        }
    )
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest


def load_contaminated(in_dir) -> ContaminatedCorpus:
    """Load a contaminated corpus, verifying checksums and declared counts."""
    in_dir = Path(in_dir)
    mpath = in_dir / "manifest.json"
    if not mpath.exists():
        raise FileNotFoundError(f"contaminated-corpus manifest not found: {mpath}")
    manifest = json.loads(mpath.read_text())

    spath = in_dir / "samples.f64"
    payload = spath.read_bytes()
    n = int(manifest["n_records"])
    if len(payload) != n * SEGMENT_LEN * 8:
        raise CorruptCorpusError(
            f"{spath}: payload holds {len(payload)} bytes, expected {n * SEGMENT_LEN * 8}"
        )
    if _sha256_bytes(payload) != manifest["checksum_sha256"]:
        raise CorruptCorpusError(f"{spath}: checksum mismatch")
    samples = np.frombuffer(payload, dtype="<f8").reshape(n, SEGMENT_LEN).copy()

    rpath = in_dir / "records.csv"
    records_bytes = rpath.read_bytes()
    if _sha256_bytes(records_bytes) != manifest["records_checksum_sha256"]:
        raise CorruptCorpusError(f"{rpath}: checksum mismatch")
    records_text = records_bytes.decode()
    reader = csv.reader(io.StringIO(records_text))
    header = next(reader)
    if header != _RECORD_COLUMNS:
        raise CorruptCorpusError(f"{rpath}: unexpected columns {header}")
    clean_idx = np.empty(n, dtype=np.int64)
    emg_idx = np.empty(n, dtype=np.int64)
    target = np.empty(n, dtype=np.float64)
    scale = np.empty(n, dtype=np.float64)
    count = 0
    for row in reader:
        if not row:
            continue
        i = int(row[0])
        clean_idx[i] = int(row[1])
        emg_idx[i] = int(row[2])
        target[i] = float(row[3])
        scale[i] = float(row[4])
        count += 1
    if count != n:
        raise CorruptCorpusError(f"{rpath}: {count} records, manifest declares {n}")

    return ContaminatedCorpus(
        samples=samples,
        clean_indices=clean_idx,
        emg_indices=emg_idx,
        target_snr_db=target,
        noise_scale=scale,
        snr_levels=[int(s) for s in manifest["snr_levels"]],
        split=manifest.get("split", "train"),
        manifest=manifest,
    )
