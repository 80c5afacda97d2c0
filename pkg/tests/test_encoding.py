import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import dft
from rotiq.encoding import (
    ImageGrid, bilinear_sample, build_sampling, encode, encode_flat, equivariant_prepare,
    reconstruct_image, rotation_matrix, rotation_rep, write_pgm,
)
from rotiq.sim import apply_qft
from rotiq.errors import DimensionError, EncodingError


def smooth_image(rng, w=32, h=32):
    yy, xx = np.mgrid[0:h, 0:w]
    img = np.zeros((h, w))
    for _ in range(4):
        cx, cy, s = rng.uniform(5, w - 5), rng.uniform(5, h - 5), rng.uniform(2, 6)
        img += rng.uniform(0.2, 1) * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * s * s))
    return ImageGrid.from_array(img + 0.01)


def test_sampling_geometry():
    s = build_sampling(10, 3, 128, 128)
    assert s.n_angles == 8 and s.vertex_coords.shape == (1024, 8, 2)
    assert s.center == (63.5, 63.5)
    two = build_sampling(1, 2, 32, 32)
    assert two.radii.tolist() == [7.5, 15.0] and two.r_max == 15.0
    assert np.all(np.diff(s.radii) > 0)
    assert np.allclose(s.angles, 2 * np.pi * np.arange(8) / 8)
    xy = s.vertex_coords
    assert xy.min() >= 0 and xy[..., 0].max() <= 127 and xy[..., 1].max() <= 127


def test_angles_are_counterclockwise_on_screen():
    s = build_sampling(1, 2, 33, 33)
    cx, cy = s.center
    quarter = s.vertex_coords[1, 1]  # phi = pi / 2 lies above the centre
    assert abs(quarter[0] - cx) < 1e-12 and quarter[1] < cy


def test_sampling_rejects_degenerate_images():
    with pytest.raises(EncodingError):
        build_sampling(1, 1, 1, 5)
    with pytest.raises(EncodingError):
        build_sampling(1, 1, 2, 2)
    with pytest.raises(EncodingError):
        build_sampling(0, 1, 8, 8)


def test_bilinear_sample():
    img = ImageGrid.from_array(np.arange(12.0).reshape(3, 4))
    assert bilinear_sample(img, 2, 1) == 6.0
    assert bilinear_sample(img, 1.5, 0.5) == np.mean([1, 2, 5, 6])
    assert bilinear_sample(img, 3, 2) == 11.0
    const = ImageGrid.from_array(np.full((5, 6), 0.25))
    assert np.allclose(bilinear_sample(const, np.array([0.3, 4.9]), np.array([3.7, 0.1])), 0.25)
    with pytest.raises(EncodingError):
        bilinear_sample(img, 3.5, 1)
    with pytest.raises(EncodingError):
        bilinear_sample(img, 0, -0.1)


def test_image_validation():
    with pytest.raises(EncodingError):
        ImageGrid(2, 2, [0, 1, np.nan, 0])
    with pytest.raises(DimensionError):
        ImageGrid(2, 2, [0, 1, 2])
    assert ImageGrid(3, 2, np.arange(6)).pixels.shape == (2, 3)


def test_encode_constant_image():
    img = ImageGrid.from_array(np.ones((16, 16)))
    psi = encode(img, build_sampling(1, 2, 16, 16))
    assert np.allclose(psi, 8 ** -0.5)


def test_encode_impulse_lands_on_its_index():
    s = build_sampling(2, 2, 64, 64)
    xy = s.vertex_coords
    for r, k in [(0, 0), (1, 3), (3, 2)]:
        px = np.zeros((64, 64))
        x, y = xy[r, k]
        px[int(round(y)), int(round(x))] = 1.0
        psi = encode(ImageGrid.from_array(px), s)
        assert int(np.argmax(np.abs(psi))) == r * 4 + k


def test_encode_errors_and_full_scale():
    with pytest.raises(EncodingError):
        encode(ImageGrid.from_array(np.zeros((8, 8))), build_sampling(1, 1, 8, 8))
    big = encode(smooth_image(np.random.default_rng(0), 128, 128), build_sampling(10, 3, 128, 128))
    assert big.shape == (8192,)
    assert abs(np.linalg.norm(big) - 1) < 1e-12


def test_rotation_rep_shift_matrix():
    r1 = rotation_matrix(1, 2, 1)
    shift = np.roll(np.eye(4), 1, axis=0)
    assert np.array_equal(r1, np.kron(np.eye(2), shift))
    assert np.array_equal(rotation_matrix(2, 2, 0), np.eye(16))
    with pytest.raises(ValueError):
        rotation_rep(np.zeros(8), 4, 2)


@given(st.integers(1, 3), st.integers(1, 3), st.data())
def test_rotation_rep_composes(n_rad, n_orb, data):
    n_ang = 1 << n_orb
    g = data.draw(st.integers(0, n_ang - 1))
    h = data.draw(st.integers(0, n_ang - 1))
    lhs = rotation_matrix(n_rad, n_orb, g) @ rotation_matrix(n_rad, n_orb, h)
    assert np.array_equal(lhs, rotation_matrix(n_rad, n_orb, (g + h) % n_ang))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_rotation_rep_permutes_amplitudes(seed):
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=32)
    out = rotation_rep(psi, int(rng.integers(4)), 2)
    assert sorted(np.abs(out)) == sorted(np.abs(psi))


@pytest.mark.parametrize("n_rad,n_orb", [(1, 1), (2, 2), (3, 3)])
def test_encoding_is_exactly_equivariant(n_rad, n_orb):
    rng = np.random.default_rng(n_rad * 10 + n_orb)
    img = smooth_image(rng)
    s = build_sampling(n_rad, n_orb, img.width, img.height)
    base = encode(img, s)
    for g in range(1 << n_orb):
        # resampling the same image at vertices turned by -2 pi g / N is the
        # image turned by +2 pi g / N sampled on the original polygons
        turned = encode(img, s.rotated(-2 * np.pi * g / (1 << n_orb)))
        assert np.abs(turned - rotation_rep(base, g, n_orb)).max() < 1e-10


def test_equivariant_prepare():
    img = smooth_image(np.random.default_rng(5))
    s = build_sampling(2, 3, 32, 32)
    prep = equivariant_prepare(img, s)
    assert abs(np.linalg.norm(prep) - 1) < 1e-12
    want = np.kron(np.eye(4), dft(3).conj()) @ encode(img, s)
    assert np.abs(prep - want).max() < 1e-12
    # a constant image is rotation invariant: all weight in the zero-frequency sector
    flat = equivariant_prepare(ImageGrid.from_array(np.ones((32, 32))), s)
    assert (np.abs(flat.reshape(4, 8)[:, 1:]) ** 2).sum() < 1e-28


def test_symmetric_samples_occupy_zero_frequency():
    radial = np.repeat(np.array([0.1, 0.7, 0.3, 0.5]), 8)
    out = apply_qft(radial / np.linalg.norm(radial), 2, 3, inverse=True).reshape(4, 8)
    assert np.abs(out[:, 1:]).max() < 1e-15
    assert np.allclose(np.abs(out[:, 0]) ** 2, np.array([0.1, 0.7, 0.3, 0.5]) ** 2 / 0.84)


def test_rotation_becomes_diagonal_phase_after_inverse_qft():
    rng = np.random.default_rng(4)
    img = smooth_image(rng)
    s = build_sampling(2, 2, 32, 32)
    f_dag = np.kron(np.eye(4), dft(2).conj())
    for g in range(4):
        a = f_dag @ rotation_rep(encode(img, s), g, 2)
        b = f_dag @ encode(img, s)
        phase = np.exp(-2j * np.pi * g * np.arange(4) / 4)
        assert np.abs(a - np.tile(phase, 4) * b).max() < 1e-12


def test_encode_flat():
    img = ImageGrid.from_array(np.arange(1.0, 17.0).reshape(4, 4))
    psi = encode_flat(img)
    assert np.allclose(psi.real, np.arange(1, 17) / np.linalg.norm(np.arange(1, 17)))
    with pytest.raises(EncodingError):
        encode_flat(ImageGrid.from_array(np.ones((3, 4))))


def test_reconstruct_preview():
    s = build_sampling(2, 3, 32, 32)
    flat = reconstruct_image(np.ones(32), s)
    cx, cy = s.center
    yy, xx = np.mgrid[0:32, 0:32]
    inside = np.hypot(xx - cx, yy - cy) <= s.r_max
    assert np.all(flat.pixels[inside] == 1)
    assert reconstruct_image(np.ones(32), s, 48, 20).pixels.shape == (20, 48)
    # radially banded input keeps its band order
    bands = np.repeat(np.arange(4.0), 8)
    img = reconstruct_image(bands, s)
    ring = [img.pixels[int(cy), int(round(cx + rad))] for rad in s.radii]
    assert ring == sorted(ring)
    with pytest.raises(DimensionError):
        reconstruct_image(np.ones(5), s)


def test_write_pgm(tmp_path):
    img = ImageGrid.from_array(np.array([[0.0, 0.5], [1.0, 0.25]]))
    path = tmp_path / "x.pgm"
    write_pgm(path, img)
    data = path.read_bytes()
    assert data.startswith(b"P5\n2 2\n255\n")
    assert list(data[-4:]) == [0, 128, 255, 64]
