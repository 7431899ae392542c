"""Datasets: synthetic 2-D/ball generators and a bit-exact IDX parser."""

import struct
from dataclasses import dataclass, field

import numpy as np

from .seeding import as_rng
from .tessellation import sample_unit_ball

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class IdxError(ValueError):
    pass


class WrongMagicError(IdxError):
    pass


class TruncatedPayloadError(IdxError):
    pass


class CountMismatchError(IdxError):
    pass


@dataclass
class Dataset:
    points: np.ndarray  # (N, d)
    labels: np.ndarray | None = None
    source: str = ""

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int)
            if len(self.labels) != len(self.points):
                raise ValueError("label count does not match point count")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("non-finite features")

    def __len__(self):
        return len(self.points)

    @property
    def dim(self):
        return self.points.shape[1]

    def to_csv(self, path):
        d = self.dim
        header = ",".join(f"f{i}" for i in range(d))
        cols = self.points
        if self.labels is not None:
            header += ",label"
            cols = np.column_stack([self.points, self.labels])
        np.savetxt(path, cols, delimiter=",", header=header, comments="")


def gen_gaussian_ring(modes, radius, sigma, count, seed):
    """Equal-weight mixture of `modes` isotropic 2-D Gaussians centered on
    a ring of the given radius; labels carry the mode index."""
    if modes < 1 or sigma <= 0:
        raise ValueError("modes >= 1 and sigma > 0 required")
    rng = as_rng(seed)
    labels = rng.integers(modes, size=count)
    angles = 2.0 * np.pi * labels / modes
    centers = radius * np.column_stack([np.cos(angles), np.sin(angles)])
    points = centers + sigma * rng.standard_normal((count, 2))
    return Dataset(points=points, labels=labels, source=f"gaussian_ring_{modes}")


def gen_uniform_ball_dataset(dim, count, seed):
    return Dataset(points=sample_unit_ball(dim, count, seed),
                   source=f"uniform_ball_{dim}d")


def _read_idx_header(raw, path, expected_magic, ndims):
    if len(raw) < 4 * (1 + ndims):
        raise TruncatedPayloadError(f"{path}: truncated header")
    magic = struct.unpack(">i", raw[:4])[0]
    if magic != expected_magic:
        raise WrongMagicError(f"{path}: magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    dims = struct.unpack(f">{ndims}i", raw[4:4 + 4 * ndims])
    return dims, raw[4 + 4 * ndims:]


def load_idx(path_images, path_labels=None):
    """Parse big-endian IDX files: u8 images (magic 0x803, dims
    [count, rows, cols]) flattened row-major and scaled to [0,1], plus
    optional u8 labels (magic 0x801)."""
    with open(path_images, "rb") as fh:
        raw = fh.read()
    (count, rows, cols), payload = _read_idx_header(raw, path_images,
                                                    IDX_IMAGES_MAGIC, 3)
    expected = count * rows * cols
    if len(payload) < expected:
        raise TruncatedPayloadError(
            f"{path_images}: expected {expected} pixels, found {len(payload)}")
    pixels = np.frombuffer(payload[:expected], dtype=np.uint8)
    points = pixels.reshape(count, rows * cols).astype(float) / 255.0

    labels = None
    if path_labels is not None:
        with open(path_labels, "rb") as fh:
            raw = fh.read()
        (label_count,), payload = _read_idx_header(raw, path_labels,
                                                   IDX_LABELS_MAGIC, 1)
        if label_count != count:
            raise CountMismatchError(
                f"{path_labels}: {label_count} labels for {count} images")
        if len(payload) < label_count:
            raise TruncatedPayloadError(f"{path_labels}: truncated payload")
        labels = np.frombuffer(payload[:label_count], dtype=np.uint8).astype(int)
    return Dataset(points=points, labels=labels, source=path_images)


def write_idx_images(path, images):
    """Inverse of load_idx's image branch, for fixtures: images is a
    (count, rows, cols) uint8 array."""
    images = np.asarray(images, dtype=np.uint8)
    count, rows, cols = images.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack(">4i", IDX_IMAGES_MAGIC, count, rows, cols))
        fh.write(images.tobytes())


def write_idx_labels(path, labels):
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">2i", IDX_LABELS_MAGIC, len(labels)))
        fh.write(labels.tobytes())


def downscale(dataset, factor):
    """Block-mean pooling of square images stored as flat rows."""
    if factor == 1:
        return dataset
    side = int(round(np.sqrt(dataset.dim)))
    if side * side != dataset.dim:
        raise ValueError("downscale needs square images")
    if side % factor != 0:
        raise ValueError(f"side {side} not divisible by factor {factor}")
    new_side = side // factor
    imgs = dataset.points.reshape(-1, new_side, factor, new_side, factor)
    pooled = imgs.mean(axis=(2, 4)).reshape(len(dataset), new_side * new_side)
    return Dataset(points=pooled, labels=dataset.labels,
                   source=dataset.source + f"_down{factor}")
