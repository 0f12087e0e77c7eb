import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mdforge.dsp import StftConfig, quantize_db, stft, to_db
from mdforge.imaging import (
    AugmentationSpec,
    FlipHorizontal,
    HogParams,
    RotateSmall,
    ScaleFactor,
    TranslatePixels,
    augment,
    detect_peaks,
    enhance_contrast,
    flip_horizontal,
    hog,
    hog_length,
    read_pgm,
    resize_bilinear,
    to_grayscale,
    write_pgm,
)
from mdforge.synth import MaterialProfile, RadarParams, synthesize_return

images = arrays(
    np.uint8,
    st.tuples(st.integers(1, 12), st.integers(1, 12)),
    elements=st.integers(0, 255),
)


def test_to_grayscale():
    for v in (0, 1, 77, 128, 254, 255):
        assert to_grayscale(np.full((2, 2, 3), v, dtype=np.uint8)).tolist() == [[v, v], [v, v]]
    assert to_grayscale(np.array([[[255, 0, 0]]]))[0, 0] == 76
    assert to_grayscale(np.array([[[0, 0, 255]]]))[0, 0] == 29
    assert to_grayscale((np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)))).shape == (2, 2)
    with pytest.raises(ValueError):
        to_grayscale((np.zeros((2, 2)), np.zeros((2, 3)), np.zeros((2, 2))))


def test_enhance_constant_is_identity():
    img = np.full((5, 7), 93, dtype=np.uint8)
    np.testing.assert_array_equal(enhance_contrast(img), img)


def test_enhance_two_levels():
    img = np.array([[100, 100], [200, 200]], dtype=np.uint8)
    assert enhance_contrast(img).tolist() == [[127, 127], [255, 255]]


def test_enhance_ramp_is_uniform():
    ramp = np.arange(256, dtype=np.uint8).reshape(16, 16)
    out = enhance_contrast(ramp)
    levels = np.unique(out)
    for level in levels:
        cdf = np.mean(out <= level)
        assert abs(cdf - (int(level) + 1) / 256) <= 1 / 256


def test_resize_identity_and_constant():
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, (13, 17), dtype=np.uint8)
    np.testing.assert_array_equal(resize_bilinear(img, 17, 13), img)
    const = np.full((5, 9), 42, dtype=np.uint8)
    for w, h in ((1, 1), (20, 3), (9, 5), (64, 64)):
        assert np.all(resize_bilinear(const, w, h) == 42)


def test_resize_hand_example():
    img = np.array([[0, 0], [255, 255]], dtype=np.uint8)
    assert resize_bilinear(img, 4, 2).tolist() == [[0, 0, 0, 0], [255, 255, 255, 255]]


def test_resize_half_pixel_values():
    # 1x2 -> 1x4: source x = (j + 0.5) / 2 - 0.5 = -0.25, 0.25, 0.75, 1.25 (clamped)
    img = np.array([[0, 100]], dtype=np.uint8)
    assert resize_bilinear(img, 4, 1).tolist() == [[0, 25, 75, 100]]


@settings(max_examples=60)
@given(images, st.integers(1, 20), st.integers(1, 20))
def test_resize_stays_in_range(img, w, h):
    out = resize_bilinear(img, w, h)
    assert out.shape == (h, w)
    assert out.min() >= img.min() and out.max() <= img.max()


def test_peaks_examples():
    assert detect_peaks(np.full((6, 6), 50, dtype=np.uint8), 0) == []
    img = np.zeros((9, 9), dtype=np.uint8)
    img[4, 6] = 200
    peaks = detect_peaks(img, min_intensity=100)
    assert [(p.row, p.column, p.intensity) for p in peaks] == [(4, 6, 200)]
    img[1, 1] = 250
    img[7, 2] = 200
    assert [(p.row, p.column) for p in detect_peaks(img, 100)] == [(1, 1), (4, 6), (7, 2)]


def test_peaks_plateau_and_borders():
    img = np.zeros((5, 5), dtype=np.uint8)
    img[2, 1:3] = 180
    assert detect_peaks(img, 100) == []
    img[0, 4] = 90
    assert [(p.row, p.column) for p in detect_peaks(img, 50)] == [(0, 4)]
    with pytest.raises(ValueError):
        detect_peaks(img, 0, neighborhood=4)


def test_peaks_larger_neighborhood():
    img = np.zeros((7, 7), dtype=np.uint8)
    img[1, 1] = 100
    img[3, 3] = 150
    assert len(detect_peaks(img, 50, 3)) == 2
    assert [(p.row, p.column) for p in detect_peaks(img, 50, 5)] == [(3, 3)]


def test_peaks_on_noiseless_spectrogram():
    radar = RadarParams(sample_rate=6400.0)
    beta = 0.10264
    d = beta * radar.wavelength / (4 * np.pi)
    profile = MaterialProfile("brass", 200.0, ((1, d, 0.0),), snr_db=float("inf"))
    spec = stft(synthesize_return(profile, radar, 2.0, 0), StftConfig())
    column = quantize_db(to_db(spec.values.mean(axis=1, keepdims=True)))
    rows = sorted(p.row for p in detect_peaks(column, min_intensity=100))
    offset = int(np.floor(200.0 / spec.bin_spacing + 0.5))
    z = spec.zero_bin_index
    assert rows == [z - offset, z, z + offset]


@settings(max_examples=40)
@given(
    arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12)), elements=st.integers(0, 127)),
    st.integers(0, 128),
)
def test_peaks_invariant_under_monotone_map(img, shift):
    # strictly increasing maps of 0..127 into 0..255
    lut = np.minimum(np.arange(128) + shift, 255).astype(np.uint8)
    lut2 = (2 * np.arange(128) + 1).astype(np.uint8)
    before = {(p.row, p.column) for p in detect_peaks(img, 0)}
    assert before == {(p.row, p.column) for p in detect_peaks(lut[img], 0)}
    assert before == {(p.row, p.column) for p in detect_peaks(lut2[img], 0)}


def test_hog_length_and_constant():
    img = np.full((64, 64), 120, dtype=np.uint8)
    desc = hog(img)
    assert desc.shape == (1764,) == (hog_length(64, 64),)
    assert not desc.any()
    with pytest.raises(ValueError):
        hog(np.zeros((60, 64), dtype=np.uint8))


def test_hog_vertical_edge_single_bin():
    img = np.zeros((16, 16), dtype=np.uint8)
    img[:, 8:] = 255
    params = HogParams(cell_size=8, block_size=1, block_stride=1, bin_count=9)
    cells = hog(img, params).reshape(2, 2, 9)
    for cell in cells.reshape(-1, 9):
        assert cell[0] == pytest.approx(1.0)
        assert np.all(cell[1:] == 0)


def test_hog_interpolates_between_bins():
    # a horizontal edge has gradient orientation 90 degrees: halfway between bins 4 (80) and 5 (100)
    img = np.zeros((8, 8), dtype=np.uint8)
    img[4:, :] = 255
    cell = hog(img, HogParams(8, 1, 1, 9))
    assert cell[4] == pytest.approx(cell[5])
    assert cell[4] > 0
    assert np.count_nonzero(cell) == 2


@settings(max_examples=20, deadline=None)
@given(arrays(np.uint8, (32, 32), elements=st.integers(0, 255)))
def test_hog_block_norms(img):
    params = HogParams()
    desc = hog(img, params).reshape(-1, params.block_size**2 * params.bin_count)
    assert np.all(desc >= 0)
    assert np.all(np.linalg.norm(desc, axis=1) <= 1 + 1e-6)


@given(images)
def test_flip_involution(img):
    np.testing.assert_array_equal(flip_horizontal(flip_horizontal(img)), img)


def test_transforms_keep_shape():
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, (32, 32), dtype=np.uint8)
    for t in (RotateSmall(), FlipHorizontal(), TranslatePixels(), ScaleFactor()):
        assert t.apply(img, np.random.default_rng(1)).shape == img.shape


def test_translation_moves_content():
    img = np.zeros((16, 16), dtype=np.uint8)
    img[5, 5] = 255
    out = TranslatePixels(3, 3).apply(img, np.random.default_rng(0))
    (r,), (c,) = np.nonzero(out)
    assert out[r, c] == 255
    assert abs(r - 5) <= 3 and abs(c - 5) <= 3


def test_augment_count_resolutions_and_determinism():
    rng = np.random.default_rng(3)
    img = rng.integers(0, 256, (256, 256), dtype=np.uint8)
    spec = AugmentationSpec(per_original=10, seed=99)
    a = augment(img, spec, image_index=4)
    b = augment(img, spec, image_index=4)
    assert len(a) == 10
    assert [x.shape[0] for x in a] == [64, 96, 128, 256, 64, 96, 128, 256, 64, 96]
    assert all(x.shape[0] == x.shape[1] for x in a)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    c = augment(img, spec, image_index=5)
    assert any(not np.array_equal(x, y) for x, y in zip(a, c))
    assert not any(x.shape == img.shape and np.array_equal(x, img) for x in a[3::4])


def test_augment_count_law():
    classes, originals = 3, 8
    spec = AugmentationSpec()
    per_class = originals * (1 + spec.per_original)
    assert per_class == 88
    assert classes * per_class == 264


def test_augmentation_spec_validation():
    with pytest.raises(ValueError):
        AugmentationSpec(per_original=0)
    with pytest.raises(ValueError):
        AugmentationSpec(output_resolutions=())
    with pytest.raises(ValueError):
        AugmentationSpec(output_resolutions=(4,))


def test_pgm_roundtrip_bit_exact(tmp_path):
    img = np.arange(12, dtype=np.uint8).reshape(3, 4)
    path = tmp_path / "a.pgm"
    write_pgm(path, img)
    assert path.read_bytes() == b"P5\n4 3\n255\n" + bytes(range(12))
    np.testing.assert_array_equal(read_pgm(path), img)
    (tmp_path / "c.pgm").write_bytes(b"P5\n# comment\n4 3\n255\n" + bytes(range(12)))
    np.testing.assert_array_equal(read_pgm(tmp_path / "c.pgm"), img)
    (tmp_path / "b.pgm").write_bytes(b"P2\n4 3\n255\n")
    with pytest.raises(ValueError):
        read_pgm(tmp_path / "b.pgm")
