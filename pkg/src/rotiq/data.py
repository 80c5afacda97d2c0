"""Synthetic rotation-invariant image classes and the on-disk dataset format.

Class ``c`` is a Gaussian ring at radius ``c / (n_classes + 1) * r_max``
whose intensity is modulated by ``(1 + cos(c * (theta - alpha))) / 2``.  The
label depends only on the radial profile; the lobe orientation ``alpha`` is a
nuisance drawn uniformly per image.

A dataset directory holds ``manifest.json``, ``images.f32`` (little-endian
float32, row-major, images concatenated) and ``labels.csv`` (``index,label``).
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np
from scipy import ndimage

from .encoding import ImageGrid, image_center, outer_radius
from .errors import ConfigError, DatasetFormatError

FORMAT_VERSION = 1
IMAGES_FILE = "images.f32"
LABELS_FILE = "labels.csv"
MANIFEST_FILE = "manifest.json"


@dataclass(frozen=True)
class SyntheticSpec:
    n_classes: int = 4
    width: int = 32
    height: int = 32
    noise_sigma: float = 0.05
    samples_per_class: int = 128
    seed: int = 0
    ring_width_frac: float = 0.1

    def __post_init__(self):
        if self.n_classes < 2:
            raise ConfigError("need at least two classes")
        if self.width < 8 or self.height < 8:
            raise ConfigError("images must be at least 8x8")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be non-negative")
        if self.samples_per_class < 1:
            raise ConfigError("samples_per_class must be positive")
        if not 0 < self.ring_width_frac < 0.5:
            raise ConfigError("ring_width_frac must lie in (0, 0.5)")

    @property
    def count(self) -> int:
        return self.n_classes * self.samples_per_class


@dataclass
class DatasetManifest:
    spec: SyntheticSpec
    count: int
    labels: list[int]
    rotation_angles: list[float]
    images_file: str = IMAGES_FILE
    labels_file: str = LABELS_FILE
    images_sha256: str = ""
    format_version: int = FORMAT_VERSION
    directory: Path | None = field(default=None, compare=False)

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "spec": asdict(self.spec),
            "count": self.count,
            "width": self.spec.width,
            "height": self.spec.height,
            "files": {"images": self.images_file, "labels": self.labels_file},
            "images_sha256": self.images_sha256,
            "rotation_angles": self.rotation_angles,
        }


def class_pattern(c: int, spec: SyntheticSpec, rotation_angle: float = 0.0) -> np.ndarray:
    """Noise-free intensity of class ``c`` with its lobes turned by ``rotation_angle``."""
    if not 1 <= c <= spec.n_classes:
        raise ConfigError(f"class {c} outside 1..{spec.n_classes}")
    cx, cy = image_center(spec.width, spec.height)
    r_max = outer_radius(spec.width, spec.height)
    yy, xx = np.mgrid[0:spec.height, 0:spec.width].astype(float)
    rho = np.hypot(xx - cx, yy - cy)
    theta = np.arctan2(cy - yy, xx - cx)
    ring_r = c / (spec.n_classes + 1) * r_max
    sigma = spec.ring_width_frac * r_max
    ring = np.exp(-((rho - ring_r) ** 2) / (2 * sigma ** 2))
    return ring * 0.5 * (1 + np.cos(c * (theta - rotation_angle)))


def generate_class_image(c: int, spec: SyntheticSpec, rotation_angle: float,
                         rng: np.random.Generator) -> ImageGrid:
    img = class_pattern(c, spec, rotation_angle)
    if spec.noise_sigma > 0:
        img = img + rng.normal(0.0, spec.noise_sigma, size=img.shape)
    return ImageGrid(spec.width, spec.height, np.clip(img, 0.0, 1.0))


def rotate_image(image: ImageGrid, angle: float) -> ImageGrid:
    """Raster rotation about the image centre, counterclockwise, bilinear."""
    out = ndimage.rotate(image.pixels, np.degrees(angle), reshape=False, order=1,
                         mode="constant", cval=0.0)
    return ImageGrid(image.width, image.height, out)


def radial_profile(image: ImageGrid, bins: int | None = None) -> np.ndarray:
    """Mean intensity per integer-radius annulus about the sampling centre."""
    cx, cy = image_center(image.width, image.height)
    yy, xx = np.mgrid[0:image.height, 0:image.width]
    rho = np.hypot(xx - cx, yy - cy)
    idx = np.round(rho).astype(int).ravel()
    bins = idx.max() + 1 if bins is None else bins
    keep = idx < bins
    sums = np.bincount(idx[keep], weights=image.flat[keep], minlength=bins)
    counts = np.bincount(idx[keep], minlength=bins)
    return sums / np.maximum(counts, 1)


def label_for_index(index: int, n_classes: int) -> int:
    return index % n_classes + 1


def generate_images(spec: SyntheticSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(images[count, h, w] float32, labels[count], angles[count])``.

    Image ``i`` draws its rotation and noise from the substream ``(seed, i)``,
    so any image can be regenerated independently of the others.
    """
    images = np.empty((spec.count, spec.height, spec.width), dtype=np.float32)
    labels = np.empty(spec.count, dtype=int)
    angles = np.empty(spec.count)
    for i in range(spec.count):
        rng = np.random.default_rng([spec.seed, i])
        c = label_for_index(i, spec.n_classes)
        angles[i] = rng.uniform(0.0, 2 * np.pi)
        images[i] = generate_class_image(c, spec, angles[i], rng).pixels
        labels[i] = c
    return images, labels, angles


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def generate_dataset(spec: SyntheticSpec, out_dir: str | Path) -> DatasetManifest:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    images, labels, angles = generate_images(spec)
    blob = images.astype("<f4").tobytes()
    (out / IMAGES_FILE).write_bytes(blob)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["index", "label"])
    writer.writerows((i, int(l)) for i, l in enumerate(labels))
    (out / LABELS_FILE).write_text(buf.getvalue())
    manifest = DatasetManifest(spec, spec.count, [int(l) for l in labels],
                               [float(a) for a in angles], images_sha256=_sha256(blob), directory=out)
    (out / MANIFEST_FILE).write_text(json.dumps(manifest.to_dict(), indent=2) + "\n")
    return manifest


def read_manifest(directory: str | Path) -> DatasetManifest:
    d = Path(directory)
    try:
        raw = json.loads((d / MANIFEST_FILE).read_text())
    except FileNotFoundError:
        raise DatasetFormatError(f"no {MANIFEST_FILE} in {d}") from None
    version = raw.get("format_version")
    if version != FORMAT_VERSION:
        raise DatasetFormatError(f"dataset format version {version!r}, expected {FORMAT_VERSION}")
    spec = SyntheticSpec(**raw["spec"])
    files = raw.get("files", {})
    labels = _read_labels(d / files.get("labels", LABELS_FILE), raw["count"], spec.n_classes)
    return DatasetManifest(spec, int(raw["count"]), labels, list(raw.get("rotation_angles", [])),
                           files.get("images", IMAGES_FILE), files.get("labels", LABELS_FILE),
                           raw.get("images_sha256", ""), version, d)


def _read_labels(path: Path, count: int, n_classes: int) -> list[int]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["index", "label"]:
        raise DatasetFormatError(f"{path.name} lacks the index,label header")
    labels = []
    for i, row in enumerate(rows[1:]):
        if len(row) != 2 or int(row[0]) != i:
            raise DatasetFormatError(f"{path.name}: row {i + 1} malformed or out of order")
        lab = int(row[1])
        if not 1 <= lab <= n_classes:
            raise DatasetFormatError(f"{path.name}: label {lab} outside 1..{n_classes}")
        labels.append(lab)
    if len(labels) != count:
        raise DatasetFormatError(f"{path.name} has {len(labels)} labels, manifest says {count}")
    return labels


def load_arrays(directory: str | Path) -> tuple[DatasetManifest, np.ndarray, np.ndarray]:
    """Manifest, ``images[count, h, w]`` and ``labels[count]`` with all integrity checks."""
    manifest = read_manifest(directory)
    spec = manifest.spec
    blob = (Path(directory) / manifest.images_file).read_bytes()
    expected = manifest.count * spec.width * spec.height * 4
    if len(blob) != expected:
        raise DatasetFormatError(f"{manifest.images_file} truncated: {len(blob)} bytes, expected {expected}")
    if manifest.images_sha256 and _sha256(blob) != manifest.images_sha256:
        raise DatasetFormatError(f"{manifest.images_file} checksum mismatch")
    images = np.frombuffer(blob, dtype="<f4").reshape(manifest.count, spec.height, spec.width)
    return manifest, images.astype(float), np.array(manifest.labels, dtype=int)


def load_dataset(directory: str | Path) -> tuple[DatasetManifest, Iterator[tuple[ImageGrid, int]]]:
    manifest, images, labels = load_arrays(directory)
    spec = manifest.spec

    def stream():
        for img, lab in zip(images, labels):
            yield ImageGrid(spec.width, spec.height, img), int(lab)

    return manifest, stream()
