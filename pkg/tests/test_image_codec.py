import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emgscrub.image_codec import (
    IMAGE_SIDE,
    ScaleInfo,
    SegmentImage,
    decode,
    decode_batch,
    encode,
    encode_batch,
    export_png,
    from_network_range,
    import_png,
    to_network_range,
)
from emgscrub.signal_core import SEGMENT_LEN, Segment, SegmentKind


class TestTypes:
    def test_scale_info_validation(self):
        ScaleInfo(-1.0, 1.0)
        ScaleInfo(2.0, 2.0)  # degenerate allowed
        with pytest.raises(ValueError):
            ScaleInfo(1.0, -1.0)
        with pytest.raises(ValueError):
            ScaleInfo(np.nan, 1.0)

    def test_segment_image_validation(self):
        SegmentImage(np.full((32, 32), 0.5))
        with pytest.raises(ValueError, match="32"):
            SegmentImage(np.zeros((16, 16)))
        with pytest.raises(ValueError, match=r"\[0,1\]"):
            SegmentImage(np.full((32, 32), 1.5))
        bad = np.full((32, 32), 0.5)
        bad[0, 0] = np.nan
        with pytest.raises(ValueError, match="finite"):
            SegmentImage(bad)


class TestEncode:
    def test_constant_segment(self):
        img, scale = encode(np.full(SEGMENT_LEN, 3.0))
        np.testing.assert_array_equal(img.pixels, 0.5)
        assert scale.y_min == scale.y_max == 3.0

    def test_ramp_is_monotone_row_major(self):
        img, scale = encode(np.arange(SEGMENT_LEN, dtype=np.float64))
        assert img.pixels[0, 0] == 0.0
        assert img.pixels[31, 31] == 1.0
        flat = img.pixels.reshape(-1)
        assert np.all(np.diff(flat) > 0)
        assert (scale.y_min, scale.y_max) == (0.0, 1023.0)

    def test_non_finite_rejected(self):
        samples = np.zeros(SEGMENT_LEN)
        samples[0] = np.inf
        with pytest.raises(ValueError, match="finite"):
            encode(samples)

    def test_wrong_length_rejected(self):
        with pytest.raises(ValueError, match="1024"):
            encode(np.zeros(100))


class TestDecode:
    def test_extreme_pixels_map_to_scale_endpoints(self):
        pixels = np.full((32, 32), 0.5)
        pixels[0, 0] = 0.0
        pixels[31, 31] = 1.0
        seg = decode(SegmentImage(pixels), ScaleInfo(-10.0, 10.0))
        assert seg.samples[0] == -10.0
        assert seg.samples[-1] == 10.0

    def test_uniform_image_gives_midpoint(self):
        seg = decode(SegmentImage(np.full((32, 32), 0.7)), ScaleInfo(-1.0, 1.0))
        np.testing.assert_array_equal(seg.samples, 0.0)

    def test_output_attains_scale_endpoints(self, rng):
        pixels = rng.uniform(0, 1, (32, 32))
        seg = decode(SegmentImage(pixels), ScaleInfo(-3.0, 5.0))
        assert seg.samples.min() == pytest.approx(-3.0, abs=1e-12)
        assert seg.samples.max() == pytest.approx(5.0, abs=1e-12)

    def test_monotone_in_pixels(self, rng):
        pixels = rng.uniform(0, 1, (32, 32))
        seg = decode(SegmentImage(pixels), ScaleInfo(0.0, 1.0))
        flat = pixels.reshape(-1)
        order = np.argsort(flat)
        assert np.all(np.diff(seg.samples[order]) >= 0)

    def test_default_kind_is_denoised(self):
        seg = decode(SegmentImage(np.full((32, 32), 0.5)), ScaleInfo(0.0, 1.0))
        assert seg.kind is SegmentKind.DENOISED

    @given(
        a=st.floats(0.05, 0.45),
        b=st.floats(0.0, 0.5),
        seed=st.integers(0, 2**31),
    )
    @settings(max_examples=40, deadline=None)
    def test_affine_invariance(self, a, b, seed):
        # decode renormalizes by the image's own extrema, so an affine pixel
        # transform (kept inside [0,1]) must not change the decoded signal
        r = np.random.default_rng(seed)
        pixels = r.uniform(0.0, 1.0, (32, 32))
        shifted = a * pixels + b * (1.0 - a)  # stays within [0,1] by construction
        base = decode(SegmentImage(pixels), ScaleInfo(-1, 1))
        moved = decode(SegmentImage(shifted), ScaleInfo(-1, 1))
        np.testing.assert_allclose(moved.samples, base.samples, atol=1e-9)


class TestRoundTrip:
    def test_float_path_round_trip(self, rng):
        for _ in range(50):
            samples = rng.standard_normal(SEGMENT_LEN) * rng.uniform(0.1, 50)
            img, scale = encode(samples)
            back = decode(img, scale)
            span = scale.y_max - scale.y_min
            assert np.max(np.abs(back.samples - samples)) <= 1e-6 * span

    def test_png_path_round_trip(self, rng, tmp_path):
        samples = rng.standard_normal(SEGMENT_LEN)
        img, scale = encode(samples)
        export_png(img, tmp_path / "seg.png")
        back = decode(import_png(tmp_path / "seg.png"), scale)
        span = scale.y_max - scale.y_min
        assert np.max(np.abs(back.samples - samples)) <= (1.0 / 255.0) * span


class TestNetworkRange:
    def test_midpoint_maps_to_zero(self):
        grid = to_network_range(SegmentImage(np.full((32, 32), 0.5)))
        np.testing.assert_array_equal(grid, 0.0)

    def test_composition_is_identity(self, rng):
        pixels = rng.uniform(0, 1, (32, 32))
        back = from_network_range(to_network_range(SegmentImage(pixels)))
        np.testing.assert_allclose(back.pixels, pixels, atol=1e-7)

    def test_out_of_range_network_output_clamped(self):
        grid = np.full((32, 32), 0.0)
        grid[0, 0] = 1.2
        grid[0, 1] = -7.0
        img = from_network_range(grid)
        assert img.pixels[0, 0] == 1.0
        assert img.pixels[0, 1] == 0.0

    def test_wrong_shape_rejected(self):
        with pytest.raises(ValueError, match="32"):
            from_network_range(np.zeros((8, 8)))


class TestPng:
    def test_uniform_half_rounds_up_to_128(self, tmp_path):
        export_png(SegmentImage(np.full((32, 32), 0.5)), tmp_path / "u.png")
        from PIL import Image

        arr = np.asarray(Image.open(tmp_path / "u.png"))
        assert arr.shape == (32, 32)
        assert np.all(arr == 128)

    def test_quantization_error_bounded(self, rng, tmp_path):
        pixels = rng.uniform(0, 1, (32, 32))
        export_png(SegmentImage(pixels), tmp_path / "q.png")
        back = import_png(tmp_path / "q.png")
        assert np.max(np.abs(back.pixels - pixels)) <= 1.0 / 255.0

    def test_rgb_import_collapses_channels(self, tmp_path):
        from PIL import Image

        arr = np.zeros((32, 32, 3), dtype=np.uint8)
        arr[..., 0] = 30
        arr[..., 1] = 60
        arr[..., 2] = 90
        Image.fromarray(arr, mode="RGB").save(tmp_path / "rgb.png")
        img = import_png(tmp_path / "rgb.png")
        np.testing.assert_allclose(img.pixels, 60.0 / 255.0, atol=1e-12)


class TestBatchHelpers:
    def test_encode_batch_matches_per_item(self, rng):
        samples = rng.standard_normal((8, SEGMENT_LEN))
        samples[3] = 2.5  # one constant row
        pixels, y_min, y_max = encode_batch(samples)
        for i in range(8):
            img, scale = encode(samples[i])
            np.testing.assert_array_equal(pixels[i], img.pixels)
            assert (y_min[i], y_max[i]) == (scale.y_min, scale.y_max)

    def test_decode_batch_matches_per_item(self, rng):
        pixels = rng.uniform(0, 1, (6, IMAGE_SIDE, IMAGE_SIDE))
        pixels[2] = 0.4  # constant image
        y_min = rng.uniform(-5, 0, 6)
        y_max = y_min + rng.uniform(0.1, 5, 6)
        out = decode_batch(pixels, y_min, y_max)
        for i in range(6):
            seg = decode(SegmentImage(pixels[i]), ScaleInfo(y_min[i], y_max[i]))
            np.testing.assert_allclose(out[i], seg.samples, atol=1e-12)

    def test_segment_objects_accepted_by_encode(self, random_segment):
        seg = random_segment()
        img, scale = encode(seg)
        back = decode(img, scale)
        assert np.max(np.abs(back.samples - seg.samples)) <= 1e-6 * scale.span
