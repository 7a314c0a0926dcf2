import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emgscrub.dataset import (
    CSV_FORMAT,
    RAW_F32,
    ContaminatedCorpus,
    Corpus,
    CorruptCorpusError,
    DataValidationError,
    SplitPlan,
    derive_seed,
    expand_corpus,
    generate_contaminated,
    load_contaminated,
    load_corpus,
    manifest_path_for,
    save_contaminated,
    save_corpus,
    split_corpus,
    stratified_subset,
)
from emgscrub.signal_core import SEGMENT_LEN, SegmentKind, measure_snr_db


def _corpus(n, seed=0, kind=SegmentKind.CLEAN_EEG):
    rng = np.random.default_rng(seed)
    return Corpus(samples=rng.standard_normal((n, SEGMENT_LEN)), kind=kind)


class TestCorpus:
    def test_count_and_segments(self):
        c = _corpus(3)
        assert c.count == len(c) == 3
        seg = c.segment(1)
        assert seg.kind is SegmentKind.CLEAN_EEG
        np.testing.assert_array_equal(seg.samples, c.samples[1])

    def test_rejects_wrong_width(self):
        with pytest.raises(DataValidationError, match="1024"):
            Corpus(samples=np.zeros((2, 100)), kind=SegmentKind.EMG)

    def test_rejects_empty(self):
        with pytest.raises(DataValidationError, match="empty"):
            Corpus(samples=np.zeros((0, SEGMENT_LEN)), kind=SegmentKind.EMG)

    def test_rejects_non_finite(self):
        samples = np.zeros((2, SEGMENT_LEN))
        samples[1, 5] = np.nan
        with pytest.raises(DataValidationError, match="non-finite"):
            Corpus(samples=samples, kind=SegmentKind.EMG)


class TestCorpusIO:
    def test_raw_round_trip(self, tmp_path):
        c = _corpus(5)
        manifest = save_corpus(c, tmp_path / "c.f32")
        assert manifest["n_segments"] == 5
        loaded = load_corpus(tmp_path / "c.f32", RAW_F32, SegmentKind.CLEAN_EEG)
        assert loaded.count == 5
        # float32 quantization is the only loss on this path
        np.testing.assert_allclose(loaded.samples, c.samples, atol=1e-6)

    def test_raw_is_bit_exact_for_f32_data(self, tmp_path):
        rng = np.random.default_rng(1)
        f32 = rng.standard_normal((4, SEGMENT_LEN)).astype(np.float32)
        c = Corpus(samples=f32.astype(np.float64), kind=SegmentKind.EMG)
        save_corpus(c, tmp_path / "c.f32")
        loaded = load_corpus(tmp_path / "c.f32", RAW_F32, SegmentKind.EMG)
        np.testing.assert_array_equal(loaded.samples, c.samples)

    def test_csv_round_trip(self, tmp_path):
        c = _corpus(3)
        save_corpus(c, tmp_path / "c.csv", CSV_FORMAT)
        loaded = load_corpus(tmp_path / "c.csv", CSV_FORMAT, SegmentKind.CLEAN_EEG)
        np.testing.assert_array_equal(loaded.samples, c.samples)  # repr round-trips

    def test_manifest_payload_disagreement(self, tmp_path):
        c = _corpus(4)
        save_corpus(c, tmp_path / "c.f32")
        mpath = manifest_path_for(tmp_path / "c.f32")
        manifest = json.loads(mpath.read_text())
        manifest["n_segments"] = 5
        mpath.write_text(json.dumps(manifest))
        with pytest.raises(DataValidationError, match="declares"):
            load_corpus(tmp_path / "c.f32", RAW_F32, SegmentKind.CLEAN_EEG)

    def test_checksum_mismatch(self, tmp_path):
        c = _corpus(2)
        save_corpus(c, tmp_path / "c.f32")
        payload = bytearray((tmp_path / "c.f32").read_bytes())
        payload[0] ^= 0xFF
        (tmp_path / "c.f32").write_bytes(bytes(payload))
        with pytest.raises(CorruptCorpusError, match="checksum"):
            load_corpus(tmp_path / "c.f32", RAW_F32, SegmentKind.CLEAN_EEG)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_corpus(tmp_path / "nope.f32", RAW_F32, SegmentKind.CLEAN_EEG)

    def test_csv_wrong_column_count(self, tmp_path):
        (tmp_path / "bad.csv").write_text("1.0,2.0,3.0\n")
        with pytest.raises(DataValidationError, match="columns"):
            load_corpus(tmp_path / "bad.csv", CSV_FORMAT, SegmentKind.CLEAN_EEG)


class TestExpand:
    def test_noop_when_target_equals_count(self):
        c = _corpus(10)
        out = expand_corpus(c, 10, seed=4)
        np.testing.assert_array_equal(out.samples, c.samples)

    def test_originals_first_then_resampled(self):
        c = _corpus(10)
        out = expand_corpus(c, 14, seed=4)
        assert out.count == 14
        np.testing.assert_array_equal(out.samples[:10], c.samples)
        for row in out.samples[10:]:
            assert any(np.array_equal(row, orig) for orig in c.samples)

    def test_deterministic(self):
        c = _corpus(10)
        a = expand_corpus(c, 25, seed=99)
        b = expand_corpus(c, 25, seed=99)
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_different_seed_differs(self):
        c = _corpus(10)
        a = expand_corpus(c, 40, seed=1)
        b = expand_corpus(c, 40, seed=2)
        assert not np.array_equal(a.samples, b.samples)

    def test_target_below_count_rejected(self):
        with pytest.raises(DataValidationError, match="below"):
            expand_corpus(_corpus(10), 9, seed=0)

    def test_manifest_records_expansion(self):
        out = expand_corpus(_corpus(10), 12, seed=3)
        assert out.source_manifest["expanded_from"] == 10
        assert out.source_manifest["expansion_seed"] == 3


class TestSplit:
    def test_partition_sizes_and_disjointness(self):
        c = _corpus(20)
        train, test = split_corpus(c, SplitPlan(15, 5, seed=7))
        assert train.count == 15 and test.count == 5
        combined = np.concatenate([train.samples, test.samples])
        matched = sum(
            any(np.array_equal(row, orig) for orig in c.samples) for row in combined
        )
        assert matched == 20

    def test_every_row_used_exactly_once(self):
        # rows are distinguishable with high probability; match them up
        c = _corpus(12)
        train, test = split_corpus(c, SplitPlan(8, 4, seed=1))
        combined = np.concatenate([train.samples, test.samples])
        orig_sorted = np.sort(c.samples.sum(axis=1))
        got_sorted = np.sort(combined.sum(axis=1))
        np.testing.assert_allclose(orig_sorted, got_sorted, rtol=1e-12)

    def test_deterministic(self):
        c = _corpus(20)
        a1, b1 = split_corpus(c, SplitPlan(15, 5, seed=7))
        a2, b2 = split_corpus(c, SplitPlan(15, 5, seed=7))
        np.testing.assert_array_equal(a1.samples, a2.samples)
        np.testing.assert_array_equal(b1.samples, b2.samples)

    def test_no_shuffle_keeps_order(self):
        c = _corpus(10)
        train, test = split_corpus(c, SplitPlan(7, 3, seed=7, shuffle=False))
        np.testing.assert_array_equal(train.samples, c.samples[:7])
        np.testing.assert_array_equal(test.samples, c.samples[7:])

    def test_count_mismatch_rejected(self):
        with pytest.raises(DataValidationError, match="totals"):
            split_corpus(_corpus(20), SplitPlan(15, 6, seed=0))

    def test_zero_test_count_rejected(self):
        with pytest.raises(DataValidationError, match="positive"):
            SplitPlan(10, 0, seed=0)

    @given(
        n_train=st.integers(1, 30),
        n_test=st.integers(1, 30),
        seed=st.integers(0, 2**31),
    )
    @settings(max_examples=25, deadline=None)
    def test_partition_property(self, n_train, n_test, seed):
        c = _corpus(n_train + n_test, seed=5)
        train, test = split_corpus(c, SplitPlan(n_train, n_test, seed=seed))
        assert train.count == n_train
        assert test.count == n_test
        key = c.samples[:, 0]
        got = np.sort(np.concatenate([train.samples[:, 0], test.samples[:, 0]]))
        np.testing.assert_array_equal(np.sort(key), got)


class TestGenerateContaminated:
    def _pair(self, n=6, seed=0):
        return (
            _corpus(n, seed=seed, kind=SegmentKind.CLEAN_EEG),
            _corpus(n, seed=seed + 1, kind=SegmentKind.EMG),
        )

    def test_record_count_is_pairs_times_levels(self):
        eeg, emg = self._pair(6)
        cc = generate_contaminated(eeg, emg, list(range(-7, 3)), seed=1)
        assert cc.count == 60
        for level in range(-7, 3):
            assert cc.level_indices(level).size == 6

    def test_level_major_index_alignment(self):
        eeg, emg = self._pair(4)
        cc = generate_contaminated(eeg, emg, [-7, 0], seed=1)
        np.testing.assert_array_equal(cc.clean_indices, [0, 1, 2, 3, 0, 1, 2, 3])
        np.testing.assert_array_equal(cc.target_snr_db[:4], -7.0)
        np.testing.assert_array_equal(cc.target_snr_db[4:], 0.0)

    def test_every_record_hits_its_snr(self):
        eeg, emg = self._pair(5)
        cc = generate_contaminated(eeg, emg, list(range(-7, 3)), seed=1)
        for i in range(cc.count):
            scaled = cc.noise_scale[i] * emg.samples[int(cc.emg_indices[i])]
            measured = measure_snr_db(eeg.samples[int(cc.clean_indices[i])], scaled)
            assert measured == pytest.approx(cc.target_snr_db[i], abs=1e-6)

    def test_mixing_identity_holds_exactly(self):
        eeg, emg = self._pair(5)
        cc = generate_contaminated(eeg, emg, [-7, 2], seed=1)
        for i in range(cc.count):
            clean = eeg.samples[int(cc.clean_indices[i])]
            noise = emg.samples[int(cc.emg_indices[i])]
            expected = clean + cc.noise_scale[i] * noise
            err = np.max(np.abs(cc.samples[i] - expected))
            assert err <= 1e-9 * max(1.0, np.max(np.abs(expected)))

    def test_count_mismatch_rejected(self):
        eeg, _ = self._pair(4)
        _, emg = self._pair(5)
        with pytest.raises(DataValidationError, match="differ"):
            generate_contaminated(eeg, emg, [0], seed=1)

    def test_zero_rms_segment_reported_with_index(self):
        eeg, emg = self._pair(3)
        samples = emg.samples.copy()
        samples[1] = 0.0
        broken = Corpus(samples=samples, kind=SegmentKind.EMG)
        with pytest.raises(DataValidationError, match="EMG segment 1"):
            generate_contaminated(eeg, broken, [0], seed=1)

    def test_levels_outside_bounds_rejected(self):
        eeg, emg = self._pair(3)
        with pytest.raises(DataValidationError, match="outside"):
            generate_contaminated(eeg, emg, [-10], seed=1)
        cc = generate_contaminated(eeg, emg, [-10], seed=1, level_bounds=None)
        assert cc.count == 3

    def test_empty_levels_rejected(self):
        eeg, emg = self._pair(3)
        with pytest.raises(DataValidationError, match="empty"):
            generate_contaminated(eeg, emg, [], seed=1)

    def test_uneven_level_distribution_rejected(self):
        eeg, emg = self._pair(4)
        cc = generate_contaminated(eeg, emg, [-7, 0], seed=1)
        with pytest.raises(DataValidationError, match="unevenly"):
            ContaminatedCorpus(
                samples=cc.samples[:6],
                clean_indices=cc.clean_indices[:6],
                emg_indices=cc.emg_indices[:6],
                target_snr_db=cc.target_snr_db[:6],
                noise_scale=cc.noise_scale[:6],
                snr_levels=cc.snr_levels,
            )

    def test_record_view(self):
        eeg, emg = self._pair(3)
        cc = generate_contaminated(eeg, emg, [0], seed=1)
        rec = cc.record(2)
        assert rec.clean_index == 2
        assert rec.target_snr_db == 0.0
        np.testing.assert_array_equal(rec.contaminated.samples, cc.samples[2])


class TestContaminatedIO:
    def _cc(self, n=4, levels=(-7, 0, 2), seed=3):
        eeg = _corpus(n, seed=seed, kind=SegmentKind.CLEAN_EEG)
        emg = _corpus(n, seed=seed + 1, kind=SegmentKind.EMG)
        return generate_contaminated(eeg, emg, list(levels), seed=seed)

    def test_round_trip_bit_exact(self, tmp_path):
        cc = self._cc()
        manifest = save_contaminated(cc, tmp_path / "out")
        assert manifest["seed"] == 3
        loaded = load_contaminated(tmp_path / "out")
        np.testing.assert_array_equal(loaded.samples, cc.samples)
        np.testing.assert_array_equal(loaded.clean_indices, cc.clean_indices)
        np.testing.assert_array_equal(loaded.noise_scale, cc.noise_scale)
        np.testing.assert_array_equal(loaded.target_snr_db, cc.target_snr_db)
        assert loaded.snr_levels == cc.snr_levels
        assert loaded.split == cc.split

    def test_truncated_payload_detected(self, tmp_path):
        cc = self._cc()
        save_contaminated(cc, tmp_path / "out")
        payload = (tmp_path / "out" / "samples.f64").read_bytes()
        (tmp_path / "out" / "samples.f64").write_bytes(payload[:-8])
        with pytest.raises(CorruptCorpusError, match="bytes"):
            load_contaminated(tmp_path / "out")

    def test_tampered_records_detected(self, tmp_path):
        cc = self._cc()
        save_contaminated(cc, tmp_path / "out")
        rpath = tmp_path / "out" / "records.csv"
        text = rpath.read_text().replace("-7.0", "-6.0", 1)
        rpath.write_text(text)
        with pytest.raises(CorruptCorpusError, match="checksum"):
            load_contaminated(tmp_path / "out")

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_contaminated(tmp_path / "nothing")


class TestStratifiedSubset:
    def test_equal_per_level_counts(self):
        eeg = _corpus(20, kind=SegmentKind.CLEAN_EEG)
        emg = _corpus(20, seed=1, kind=SegmentKind.EMG)
        cc = generate_contaminated(eeg, emg, list(range(-7, 3)), seed=2)
        sub = stratified_subset(cc, 50)
        assert sub.count == 50
        for level in range(-7, 3):
            assert sub.level_indices(level).size == 5

    def test_spreads_clean_indices_across_levels(self):
        eeg = _corpus(20, kind=SegmentKind.CLEAN_EEG)
        emg = _corpus(20, seed=1, kind=SegmentKind.EMG)
        cc = generate_contaminated(eeg, emg, [-7, -6, -5, -4], seed=2)
        sub = stratified_subset(cc, 20)
        # 4 levels x 5 records, diagonal slices -> all 20 clean segments distinct
        assert len(set(sub.clean_indices.tolist())) == 20

    def test_non_multiple_rejected(self):
        eeg = _corpus(4, kind=SegmentKind.CLEAN_EEG)
        emg = _corpus(4, seed=1, kind=SegmentKind.EMG)
        cc = generate_contaminated(eeg, emg, [-7, 0], seed=2)
        with pytest.raises(DataValidationError, match="multiple"):
            stratified_subset(cc, 5)

    def test_oversized_request_rejected(self):
        eeg = _corpus(4, kind=SegmentKind.CLEAN_EEG)
        emg = _corpus(4, seed=1, kind=SegmentKind.EMG)
        cc = generate_contaminated(eeg, emg, [-7, 0], seed=2)
        with pytest.raises(DataValidationError, match="need"):
            stratified_subset(cc, 12)


class TestDeriveSeed:
    def test_stable(self):
        assert derive_seed(42, "expand-eeg") == derive_seed(42, "expand-eeg")

    def test_labels_independent(self):
        seeds = {derive_seed(42, lbl) for lbl in ("a", "b", "expand-eeg", "split-emg")}
        assert len(seeds) == 4

    def test_masters_independent(self):
        assert derive_seed(1, "x") != derive_seed(2, "x")

    def test_negative_master_rejected(self):
        with pytest.raises(ValueError, match="non-negative"):
            derive_seed(-1, "x")
