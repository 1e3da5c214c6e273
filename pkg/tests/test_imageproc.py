import io

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from lesionxfer.data import Diagnosis, LesionRecord
from lesionxfer.errors import DataError, ShapeError
from lesionxfer.imageproc import (LUMA, SCRATCH, TRANSFER, GlobalMean, PreprocessProfile, compute_global_mean,
                                  decode_image, decode_pnm, encode_pnm, preprocess, preprocess_array,
                                  preprocess_many, replicate_channels, resize, to_luma, write_pnm)


def test_luma_reference_points():
    assert to_luma(np.array([[[255, 255, 255]]]))[0, 0, 0] == pytest.approx(255.0, abs=1e-6)
    assert to_luma(np.array([[[255, 0, 0]]]))[0, 0, 0] == pytest.approx(76.203945, abs=1e-6)
    assert to_luma(np.zeros((1, 1, 3)))[0, 0, 0] == 0.0
    assert round(sum(LUMA), 6) == 1.0


def test_luma_needs_three_channels():
    with pytest.raises(ShapeError):
        to_luma(np.zeros((2, 2, 1)))


@given(arrays(np.uint8, (4, 5, 3)))
def test_luma_stays_in_range(img):
    y = to_luma(img)
    assert y.min() >= 0.0 and y.max() <= 255.0 + 1e-9


def test_replicate_and_gray_round_trip():
    assert replicate_channels(np.array([[[42]]])).tolist() == [[[42, 42, 42]]]
    gray = np.full((3, 3, 3), 77, dtype=np.uint8)
    assert np.allclose(replicate_channels(to_luma(gray)), gray, atol=1e-6)
    with pytest.raises(ShapeError):
        replicate_channels(np.zeros((2, 2, 0)))


def test_identity_resize_is_bit_identical():
    img = np.random.default_rng(0).integers(0, 256, (128, 128, 1)).astype(np.uint8)
    out = resize(img, 128)
    assert out.dtype == img.dtype and np.array_equal(out, img)


def test_constant_field_is_preserved():
    assert np.array_equal(resize(np.full((2, 2, 1), 7.0), 4), np.full((4, 4, 1), 7.0))


def test_two_pixel_ramp_upsamples_monotonically():
    out = resize(np.array([[[0.0], [255.0]]]), 2)
    assert out.shape == (2, 2, 1)
    for row in out[:, :, 0]:
        assert np.all(np.diff(row) >= 0)


def test_pixel_centre_weights_on_a_ramp():
    # 4 -> 2 samples at source positions 0.5 and 2.5
    out = resize(np.array([0.0, 10.0, 20.0, 30.0]).reshape(1, 4, 1).repeat(4, axis=0), 2)
    assert out[0, :, 0].tolist() == [5.0, 25.0]


@given(arrays(np.float64, (3, 4, 2), elements=st.floats(-100, 100)), st.integers(1, 9))
def test_resize_is_idempotent_at_target_and_bounded(img, target):
    once = resize(img, target)
    assert np.array_equal(resize(once, target), once)
    assert once.min() >= img.min() - 1e-9 and once.max() <= img.max() + 1e-9


def test_global_mean_examples():
    assert compute_global_mean([np.full((1, 1, 1), 10.0), np.full((1, 1, 1), 30.0)]).values == (20.0,)
    assert compute_global_mean([np.full((3, 2, 1), 4.5)]).values == (4.5,)
    with pytest.raises(ShapeError):
        compute_global_mean([np.zeros((1, 1, 1)), np.zeros((1, 1, 3))])
    with pytest.raises(DataError):
        compute_global_mean([])


def test_profiles_on_white_images():
    white = np.full((300, 260, 3), 255, dtype=np.uint8)
    s = preprocess_array(white, SCRATCH)
    assert s.shape == (128, 128, 1) and s.dtype == np.float32
    assert np.allclose(s, 1.0, atol=1e-6, rtol=0)
    t = preprocess_array(white, TRANSFER)
    assert t.shape == (299, 299, 3)
    assert np.allclose(t, 1.0, atol=1e-6, rtol=0)


def test_mean_subtraction_of_mid_gray_gives_zero():
    profile = PreprocessProfile("scratch", 4, 1, mean_subtract=True)
    out = preprocess_array(np.full((4, 4, 1), 127.5), profile, GlobalMean((0.5,)))
    assert np.all(out == 0.0)
    with pytest.raises(DataError):
        preprocess_array(np.zeros((4, 4, 1)), profile)


def test_pipeline_resizes_before_luma():
    # both steps are linear, so the two orders agree up to rounding; the
    # pipeline is pinned bitwise to resize-then-luma
    img = np.random.default_rng(1).integers(0, 256, (23, 31, 3)).astype(np.uint8)
    out = preprocess_array(img, SCRATCH.sized(16))
    pinned = (to_luma(resize(img, 16)) / 255.0).astype(np.float32)
    swapped = (resize(to_luma(img), 16) / 255.0).astype(np.float32)
    assert out.tobytes() == pinned.tobytes()
    assert np.allclose(out, swapped, atol=1e-6)


def test_pnm_round_trip_and_errors(tmp_path):
    img = np.random.default_rng(2).integers(0, 256, (5, 7, 3)).astype(np.uint8)
    assert np.array_equal(decode_pnm(encode_pnm(img)), img)
    gray = img[:, :, :1]
    assert np.array_equal(decode_pnm(encode_pnm(gray)), gray)
    with pytest.raises(DataError):
        decode_pnm(b"P6\n2 2\n255\n\x00\x00")
    with pytest.raises(DataError):
        decode_pnm(b"P3\n1 1\n255\n0 0 0")
    with pytest.raises(DataError):
        decode_pnm(b"P5\n1 1\n65535\n\x00\x00")


@pytest.mark.parametrize("fmt,ext", [("PNG", ".png"), ("JPEG", ".jpg")])
def test_standard_codecs(tmp_path, fmt, ext):
    path = tmp_path / f"white{ext}"
    Image.fromarray(np.full((20, 30, 3), 255, dtype=np.uint8)).save(path, fmt)
    img = decode_image(path)
    assert img.shape == (20, 30, 3)
    out = preprocess(LesionRecord("w", path, Diagnosis.NEVUS), SCRATCH)
    assert np.allclose(out, 1.0, atol=1e-6, rtol=0)


def test_undecodable_image_names_the_file(tmp_path):
    path = tmp_path / "broken.jpg"
    path.write_bytes(b"not an image")
    with pytest.raises(DataError, match="broken.jpg"):
        decode_image(path)
    with pytest.raises(DataError, match="missing.png"):
        decode_image(tmp_path / "missing.png")


def test_preprocess_many_is_independent_of_worker_count(tmp_path):
    gen = np.random.default_rng(3)
    records = []
    for i in range(6):
        path = tmp_path / f"im{i}.ppm"
        write_pnm(path, gen.integers(0, 256, (12 + i, 10, 3)).astype(np.uint8))
        records.append(LesionRecord(f"im{i}", path, Diagnosis.NEVUS))
    profile = TRANSFER.sized(8)
    serial = preprocess_many(records, profile, workers=1)
    threaded = preprocess_many(records, profile, workers=4)
    assert all(a.tobytes() == b.tobytes() for a, b in zip(serial, threaded))
