"""Polygon-vertex sampling of images and the induced rotation representation.

Images are sampled at the vertices of ``2**n_rad`` concentric regular
``2**n_orb``-gons.  The sample on polygon ``r`` at vertex ``k`` becomes the
amplitude of basis state ``r * 2**n_orb + k``, so the radial register is the
first ``n_rad`` qubits and the angular (orbital) register the last ``n_orb``.
A rotation by ``2 pi g / 2**n_orb`` then permutes amplitudes cyclically in
``k``, which the inverse QFT on the orbital register diagonalises.

Coordinates are ``(x, y) = (column, row)`` with rows growing downward; angles
are counterclockwise as seen on screen, ``x = cx + rho cos(phi)``,
``y = cy - rho sin(phi)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import DimensionError, EncodingError
from .sim import apply_qft


@dataclass(frozen=True)
class ImageGrid:
    width: int
    height: int
    pixels: np.ndarray  # shape (height, width)

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=float)
        if px.ndim == 1:
            if px.size != self.width * self.height:
                raise DimensionError(f"{px.size} pixels for a {self.width}x{self.height} image")
            px = px.reshape(self.height, self.width)
        if px.shape != (self.height, self.width):
            raise DimensionError(f"pixel array {px.shape} != ({self.height}, {self.width})")
        if not np.all(np.isfinite(px)):
            raise EncodingError("image contains non-finite pixels")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "ImageGrid":
        arr = np.asarray(arr, dtype=float)
        return cls(arr.shape[1], arr.shape[0], arr)

    @property
    def flat(self) -> np.ndarray:
        return self.pixels.reshape(-1)


def image_center(width: int, height: int) -> tuple[float, float]:
    return (width - 1) / 2, (height - 1) / 2


def outer_radius(width: int, height: int) -> float:
    return min(width, height) / 2 - 1


@dataclass(frozen=True)
class PolarSampling:
    n_rad: int
    n_orb: int
    width: int
    height: int
    r_max: float
    angle_offset: float = 0.0

    @property
    def n_qubits(self) -> int:
        return self.n_rad + self.n_orb

    @property
    def n_radii(self) -> int:
        return 1 << self.n_rad

    @property
    def n_angles(self) -> int:
        return 1 << self.n_orb

    @property
    def center(self) -> tuple[float, float]:
        return image_center(self.width, self.height)

    @property
    def radii(self) -> np.ndarray:
        return self.r_max * np.arange(1, self.n_radii + 1) / self.n_radii

    @property
    def angles(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n_angles) / self.n_angles + self.angle_offset

    @property
    def vertex_coords(self) -> np.ndarray:
        """``(2**n_rad, 2**n_orb, 2)`` array of ``(x, y)`` sampling points."""
        cx, cy = self.center
        rho = self.radii[:, None]
        phi = self.angles[None, :]
        return np.stack([cx + rho * np.cos(phi), cy - rho * np.sin(phi)], axis=-1)

    def rotated(self, angle: float) -> "PolarSampling":
        """Same polygons with every vertex turned counterclockwise by ``angle``."""
        return PolarSampling(self.n_rad, self.n_orb, self.width, self.height, self.r_max,
                             self.angle_offset + angle)


def build_sampling(n_rad: int, n_orb: int, width: int, height: int) -> PolarSampling:
    if n_rad < 1 or n_orb < 1:
        raise EncodingError("n_rad and n_orb must be at least 1")
    if width < 2 or height < 2:
        raise EncodingError(f"degenerate {width}x{height} image")
    r_max = outer_radius(width, height)
    if r_max <= 0:
        raise EncodingError(f"{width}x{height} image too small for polar sampling")
    return PolarSampling(n_rad, n_orb, width, height, r_max)


def bilinear_sample(image: ImageGrid, x, y):
    """Bilinear interpolation at continuous coordinates; scalars or arrays."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    eps = 1e-9
    if np.any(x < -eps) or np.any(x > image.width - 1 + eps) or np.any(y < -eps) or np.any(y > image.height - 1 + eps):
        raise EncodingError("sample coordinate outside the image")
    x = np.clip(x, 0, image.width - 1)
    y = np.clip(y, 0, image.height - 1)
    x0 = np.minimum(np.floor(x).astype(int), image.width - 2) if image.width > 1 else np.zeros_like(x, dtype=int)
    y0 = np.minimum(np.floor(y).astype(int), image.height - 2) if image.height > 1 else np.zeros_like(y, dtype=int)
    fx = x - x0
    fy = y - y0
    p = image.pixels
    out = ((1 - fx) * (1 - fy) * p[y0, x0] + fx * (1 - fy) * p[y0, x0 + 1]
           + (1 - fx) * fy * p[y0 + 1, x0] + fx * fy * p[y0 + 1, x0 + 1])
    return float(out) if out.ndim == 0 else out


def sample_vertices(image: ImageGrid, sampling: PolarSampling) -> np.ndarray:
    """Flat vector of vertex samples in basis order ``r * 2**n_orb + k``."""
    if (image.width, image.height) != (sampling.width, sampling.height):
        raise DimensionError("sampling was built for a different image size")
    xy = sampling.vertex_coords
    return bilinear_sample(image, xy[..., 0], xy[..., 1]).reshape(-1)


def normalize_samples(samples: np.ndarray) -> np.ndarray:
    samples = np.asarray(samples, dtype=float)
    nrm = np.linalg.norm(samples)
    if nrm == 0:
        raise EncodingError("all sampled values are zero; cannot form a quantum state")
    return (samples / nrm).astype(complex)


def encode(image: ImageGrid, sampling: PolarSampling) -> np.ndarray:
    """Unit-norm amplitude encoding of the vertex samples."""
    return normalize_samples(sample_vertices(image, sampling))


def encode_flat(image: ImageGrid) -> np.ndarray:
    """Plain amplitude encoding of the whole flattened image (needs ``w*h = 2**n``)."""
    size = image.width * image.height
    if size & (size - 1):
        raise EncodingError(f"{image.width}x{image.height} image does not fill a qubit register")
    return normalize_samples(image.flat)


def rotation_rep(state: np.ndarray, g: int, n_orb: int) -> np.ndarray:
    """Move the amplitude at ``(r, k)`` to ``(r, (k + g) mod 2**n_orb)``."""
    n_ang = 1 << n_orb
    if not 0 <= g < n_ang:
        raise ValueError(f"rotation index {g} outside [0, {n_ang})")
    state = np.asarray(state)
    if state.shape[-1] % n_ang:
        raise DimensionError("state length is not a multiple of the orbital dimension")
    s = state.reshape(state.shape[:-1] + (-1, n_ang))
    return np.roll(s, g, axis=-1).reshape(state.shape)


def rotation_matrix(n_rad: int, n_orb: int, g: int) -> np.ndarray:
    """Dense permutation matrix of ``rotation_rep``; for checks at small sizes."""
    dim = 1 << (n_rad + n_orb)
    return rotation_rep(np.eye(dim), g, n_orb).T


def equivariant_prepare(image: ImageGrid, sampling: PolarSampling) -> np.ndarray:
    """Encoded state followed by the inverse QFT on the orbital register."""
    return apply_qft(encode(image, sampling), sampling.n_rad, sampling.n_orb, inverse=True)


def reconstruct_image(samples: np.ndarray, sampling: PolarSampling,
                      width: int | None = None, height: int | None = None) -> ImageGrid:
    """Nearest-vertex rendering of samples back onto a pixel grid (preview only).

    Pixels farther from the centre than the outer polygon are left at zero.
    Complex input (an encoded state) is rendered by its real part.
    """
    samples = np.asarray(samples)
    if samples.size != sampling.n_radii * sampling.n_angles:
        raise DimensionError("sample count does not match the sampling")
    if np.iscomplexobj(samples):
        samples = samples.real
    width = sampling.width if width is None else width
    height = sampling.height if height is None else height
    sx = (width - 1) / max(sampling.width - 1, 1)
    sy = (height - 1) / max(sampling.height - 1, 1)
    xy = sampling.vertex_coords.reshape(-1, 2) * [sx, sy]
    tree = cKDTree(xy)
    yy, xx = np.mgrid[0:height, 0:width]
    pts = np.stack([xx.ravel(), yy.ravel()], axis=-1).astype(float)
    _, nearest = tree.query(pts)
    out = samples.reshape(-1)[nearest].astype(float)
    cx, cy = image_center(width, height)
    rho = np.hypot((pts[:, 0] - cx) / sx, (pts[:, 1] - cy) / sy)
    out[rho > sampling.r_max + 0.5] = 0.0
    return ImageGrid(width, height, out.reshape(height, width))


def write_pgm(path: str | Path, image: ImageGrid) -> None:
    """Binary (P5) 8-bit graymap, linearly scaled from [min, max]."""
    px = image.pixels
    lo, hi = float(px.min()), float(px.max())
    scaled = np.zeros_like(px) if hi == lo else (px - lo) / (hi - lo)
    data = np.round(scaled * 255).astype(np.uint8)
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + data.tobytes())
