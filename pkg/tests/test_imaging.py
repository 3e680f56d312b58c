import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from scriptorium.imaging import (
    PreprocessMode,
    is_informative,
    mask,
    preprocess,
    read_image,
    to_grayscale,
    write_png,
)


def luma_oracle(r, g, b):
    # scalar reference, independent of the vectorized path
    return int(np.floor(0.299 * r + 0.587 * g + 0.114 * b + 0.5))


@pytest.mark.parametrize("w,h,expected", [(1000, 100, True), (500, 100, False), (100, 100, False), (501, 100, True)])
def test_is_informative(w, h, expected):
    assert is_informative(np.zeros((h, w), np.uint8)) is expected


@given(st.integers(1, 400), st.integers(1, 400), st.integers(1, 60))
def test_is_informative_monotone_in_width(w1, w2, h):
    lo, hi = sorted((w1, w2))
    if is_informative(np.zeros((h, lo))):
        assert is_informative(np.zeros((h, hi)))


@pytest.mark.parametrize("rgb", [(255, 255, 255), (0, 0, 0), (100, 150, 200), (12, 200, 7)])
def test_to_grayscale_pixels(rgb):
    img = np.array(rgb, np.uint8).reshape(1, 1, 3)
    assert to_grayscale(img)[0, 0] == luma_oracle(*rgb)


def test_to_grayscale_worked_value():
    # 0.299*100 + 0.587*150 + 0.114*200 = 140.75
    assert to_grayscale(np.array([[[100, 150, 200]]], np.uint8))[0, 0] == 141


def test_to_grayscale_rejects_gray():
    with pytest.raises(ValueError):
        to_grayscale(np.zeros((4, 4), np.uint8))


@given(arrays(np.uint8, (5, 7, 3)))
def test_to_grayscale_within_channel_range(img):
    g = to_grayscale(img).astype(int)
    assert g.shape == (5, 7)
    assert np.all(g >= img.min(axis=2)) and np.all(g <= img.max(axis=2))


def test_mask_examples():
    assert np.all(mask(np.full((3, 3), 255, np.uint8)) == 255)
    out = mask(np.array([[135, 136, 0, 134]], np.uint8))
    assert out.tolist() == [[135, 255, 0, 134]]


@given(arrays(np.uint8, (6, 9)), st.integers(0, 255))
def test_mask_properties(img, t):
    out = mask(img, t)
    ink = img <= t
    assert np.array_equal(mask(out, t), out)
    assert np.array_equal(out[ink], img[ink])
    assert np.all(out[~ink] == 255)
    assert int((out <= t).sum()) == int(ink.sum())


def test_preprocess_modes():
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, (4, 30, 3), dtype=np.uint8)
    assert preprocess(img, "RGB") is img or np.array_equal(preprocess(img, "RGB"), img)
    white = np.full((4, 30, 3), 255, np.uint8)
    gs = preprocess(white, PreprocessMode.GS)
    assert gs.shape == (4, 30) and np.all(gs == 255)
    flat = np.full((4, 30, 3), 200, np.uint8)
    assert np.all(preprocess(flat, "GS_MASK") == 255)
    assert np.array_equal(preprocess(img, "GS_MASK"), mask(to_grayscale(img)))
    with pytest.raises(ValueError):
        preprocess(img, "BW")


def test_png_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    rgb = rng.integers(0, 256, (10, 40, 3), dtype=np.uint8)
    write_png(rgb, tmp_path / "a.png")
    assert np.array_equal(read_image(tmp_path / "a.png"), rgb)
    gray = to_grayscale(rgb)
    write_png(gray, tmp_path / "sub" / "g.png")
    from PIL import Image
    with Image.open(tmp_path / "sub" / "g.png") as im:
        assert im.mode == "L"
        assert np.array_equal(np.asarray(im), gray)
