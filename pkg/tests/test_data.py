import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rotiq.data import (
    SyntheticSpec, class_pattern, generate_class_image, generate_dataset, generate_images,
    load_arrays, load_dataset, radial_profile, read_manifest, rotate_image,
)
from rotiq.encoding import ImageGrid
from rotiq.errors import ConfigError, DatasetFormatError


def test_spec_validation():
    with pytest.raises(ConfigError):
        SyntheticSpec(n_classes=1)
    with pytest.raises(ConfigError):
        SyntheticSpec(width=7)
    with pytest.raises(ConfigError):
        SyntheticSpec(noise_sigma=-0.1)
    with pytest.raises(ConfigError):
        SyntheticSpec(ring_width_frac=0.5)
    assert SyntheticSpec().count == 4 * 128


@pytest.mark.parametrize("c", [1, 2, 3, 4])
def test_pattern_has_lobe_period(c):
    spec = SyntheticSpec(noise_sigma=0)
    a = generate_class_image(c, spec, 0.3, np.random.default_rng(0)).pixels
    b = generate_class_image(c, spec, 0.3 + 2 * np.pi / c, np.random.default_rng(0)).pixels
    assert np.allclose(a, b, atol=1e-12)


def test_invalid_class():
    with pytest.raises(ConfigError):
        class_pattern(0, SyntheticSpec())
    with pytest.raises(ConfigError):
        generate_class_image(5, SyntheticSpec(), 0.0, np.random.default_rng(0))


def test_ring_radii_separate_classes():
    spec = SyntheticSpec(noise_sigma=0, width=64, height=64)
    peaks = [int(np.argmax(radial_profile(ImageGrid.from_array(class_pattern(c, spec)))))
             for c in range(1, 5)]
    assert peaks == sorted(peaks) and len(set(peaks)) == 4
    # ring centres at c / (n_classes + 1) of the outer radius (31.5 px)
    assert np.allclose(peaks, [31.5 * c / 5 for c in range(1, 5)], atol=1.01)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.floats(0, 2 * np.pi), st.integers(0, 1000))
def test_pixels_clipped(c, angle, seed):
    img = generate_class_image(c, SyntheticSpec(noise_sigma=0.5), angle, np.random.default_rng(seed))
    assert img.pixels.min() >= 0 and img.pixels.max() <= 1


@pytest.mark.parametrize("c", [1, 2, 3])
def test_label_statistics_ignore_orientation(c):
    spec = SyntheticSpec(noise_sigma=0, width=48, height=48)
    ref = radial_profile(ImageGrid.from_array(class_pattern(c, spec, 0.0)))
    for angle in (0.4, 1.9, 4.2):
        turned = class_pattern(c, spec, angle)
        # the angular mean of cos(c(theta - a)) vanishes, so ring-averaged
        # intensity only moves by pixel-grid aliasing
        assert np.abs(radial_profile(ImageGrid.from_array(turned)) - ref).max() < 0.05
        raster = rotate_image(ImageGrid.from_array(class_pattern(c, spec, 0.0)), angle).pixels
        inner = np.hypot(*np.mgrid[-23.5:24.5, -23.5:24.5]) < 20
        assert np.abs(raster - turned)[inner].max() < 0.1


def test_generation_is_balanced_and_deterministic():
    spec = SyntheticSpec(samples_per_class=6, seed=3)
    imgs, labels, angles = generate_images(spec)
    assert imgs.shape == (24, 32, 32) and imgs.dtype == np.float32
    assert np.bincount(labels).tolist() == [0, 6, 6, 6, 6]
    assert angles.min() >= 0 and angles.max() < 2 * np.pi
    again, _, _ = generate_images(spec)
    assert np.array_equal(imgs, again)
    other, _, _ = generate_images(SyntheticSpec(samples_per_class=6, seed=4))
    assert not np.array_equal(imgs, other)
    # per-image substreams: a longer dataset shares its prefix
    longer, _, _ = generate_images(SyntheticSpec(samples_per_class=7, seed=3))
    assert np.array_equal(longer[:20], imgs[:20])


def test_files_round_trip(tmp_path):
    spec = SyntheticSpec(samples_per_class=5, seed=1)
    m = generate_dataset(spec, tmp_path / "a")
    generate_dataset(spec, tmp_path / "b")
    for name in ("manifest.json", "images.f32", "labels.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert (tmp_path / "a" / "images.f32").stat().st_size == 20 * 32 * 32 * 4
    assert (tmp_path / "a" / "labels.csv").read_text().splitlines()[:2] == ["index,label", "0,1"]
    loaded, stream = load_dataset(tmp_path / "a")
    assert loaded.count == m.count == 20 and loaded.labels == m.labels
    imgs, _, _ = generate_images(spec)
    items = list(stream)
    assert len(items) == 20
    for (img, lab), ref, want in zip(items, imgs, m.labels):
        assert np.array_equal(img.pixels, ref.astype(float)) and lab == want


@pytest.fixture
def dataset(tmp_path):
    generate_dataset(SyntheticSpec(samples_per_class=3), tmp_path)
    return tmp_path


def test_truncated_images(dataset):
    blob = (dataset / "images.f32").read_bytes()
    (dataset / "images.f32").write_bytes(blob[:-4])
    with pytest.raises(DatasetFormatError, match="truncated"):
        load_arrays(dataset)


def test_checksum_mismatch(dataset):
    blob = bytearray((dataset / "images.f32").read_bytes())
    blob[10] ^= 0xFF
    (dataset / "images.f32").write_bytes(bytes(blob))
    with pytest.raises(DatasetFormatError, match="checksum"):
        load_arrays(dataset)


def test_version_mismatch(dataset):
    raw = json.loads((dataset / "manifest.json").read_text())
    raw["format_version"] = 2
    (dataset / "manifest.json").write_text(json.dumps(raw))
    with pytest.raises(DatasetFormatError, match="version"):
        read_manifest(dataset)


def test_label_out_of_range(dataset):
    lines = (dataset / "labels.csv").read_text().splitlines()
    lines[3] = "2,7"
    (dataset / "labels.csv").write_text("\n".join(lines) + "\n")
    with pytest.raises(DatasetFormatError, match="outside"):
        load_arrays(dataset)


def test_missing_manifest(tmp_path):
    with pytest.raises(DatasetFormatError):
        load_arrays(tmp_path)
