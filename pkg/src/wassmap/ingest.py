"""MNIST ingestion: IDX parsing, class subsampling and conversion to measures."""

from __future__ import annotations

import gzip
import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    AllZeroImage,
    BadMagic,
    CountMismatch,
    InsufficientClassSamples,
    ShapeMismatch,
    TruncatedFile,
)
from .measure import DiscreteMeasure, GridImage, image_to_measure

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


@dataclass(frozen=True, eq=False)
class LabeledImageSet:
    """Stack of uint8 images with integer labels.

    ``pixels`` has shape (N, rows, cols); pixel (r, c) sits at physical
    position (r + 0.5, c + 0.5), i.e. unit spacing from origin (0, 0).
    ``indices`` maps each image back to its position in the source file.
    """

    pixels: np.ndarray
    labels: np.ndarray
    source_digest: str = ""
    indices: np.ndarray = None

    def __post_init__(self):
        px = np.asarray(self.pixels)
        lab = np.asarray(self.labels, dtype=np.int64).ravel()
        if px.ndim != 3:
            raise ShapeMismatch(f"pixels must be (N, rows, cols), got {px.shape}")
        if px.shape[0] != lab.size:
            raise CountMismatch(f"{px.shape[0]} images but {lab.size} labels")
        if lab.size and (lab.min() < 0 or lab.max() > 9):
            raise ValueError("labels must lie in 0..9")
        idx = np.arange(lab.size) if self.indices is None else np.asarray(self.indices, dtype=np.int64)
        if idx.shape != lab.shape:
            raise CountMismatch("indices and labels differ in length")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        px = px.copy()
        px.setflags(write=False)
        lab.setflags(write=False)
        object.__setattr__(self, "pixels", px)
        object.__setattr__(self, "labels", lab)

    def __len__(self):
        return self.labels.size

    def image(self, k: int) -> GridImage:
        return GridImage(self.pixels[k].astype(np.float64))

    def vectors(self) -> np.ndarray:
        """Raw intensities flattened row-major, one row per image."""
        return self.pixels.reshape(len(self), -1).astype(np.float64)


def _read(path) -> bytes:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] == b"\x1f\x8b":
        data = gzip.decompress(data)
    return data


def _check_magic(data: bytes, want: int, what: str) -> None:
    if len(data) < 4:
        raise TruncatedFile(f"{what} file has {len(data)} bytes, too short for a magic number")
    (magic,) = struct.unpack(">I", data[:4])
    if magic != want:
        raise BadMagic(f"{what} magic 0x{magic:08x}, expected 0x{want:08x}")


def parse_idx_images(data: bytes) -> np.ndarray:
    _check_magic(data, IMAGE_MAGIC, "image")
    if len(data) < 16:
        raise TruncatedFile(f"image header needs 16 bytes, file has {len(data)}")
    _, n, rows, cols = struct.unpack(">IIII", data[:16])
    need = 16 + n * rows * cols
    if len(data) < need:
        raise TruncatedFile(f"header declares {n} images of {rows}x{cols} ({need} bytes), file has {len(data)}")
    return np.frombuffer(data, dtype=np.uint8, count=n * rows * cols, offset=16).reshape(n, rows, cols)


def parse_idx_labels(data: bytes) -> np.ndarray:
    _check_magic(data, LABEL_MAGIC, "label")
    if len(data) < 8:
        raise TruncatedFile(f"label header needs 8 bytes, file has {len(data)}")
    _, n = struct.unpack(">II", data[:8])
    if len(data) < 8 + n:
        raise TruncatedFile(f"header declares {n} labels, file has {len(data) - 8} label bytes")
    return np.frombuffer(data, dtype=np.uint8, count=n, offset=8)


def load_idx(images_path, labels_path) -> LabeledImageSet:
    """Read an IDX image/label pair (gzip accepted)."""
    img_bytes = _read(images_path)
    lab_bytes = _read(labels_path)
    px = parse_idx_images(img_bytes)
    lab = parse_idx_labels(lab_bytes)
    if px.shape[0] != lab.size:
        raise CountMismatch(f"{px.shape[0]} images but {lab.size} labels")
    h = hashlib.sha256(img_bytes)
    h.update(lab_bytes)
    return LabeledImageSet(px, lab, h.hexdigest())


def idx_bytes(s: LabeledImageSet) -> tuple[bytes, bytes]:
    n, rows, cols = s.pixels.shape
    img = struct.pack(">IIII", IMAGE_MAGIC, n, rows, cols) + s.pixels.astype(np.uint8).tobytes()
    lab = struct.pack(">II", LABEL_MAGIC, n) + s.labels.astype(np.uint8).tobytes()
    return img, lab


def write_idx(s: LabeledImageSet, images_path, labels_path) -> None:
    img, lab = idx_bytes(s)
    for path, data in ((images_path, img), (labels_path, lab)):
        opener = gzip.open if str(path).endswith(".gz") else open
        with opener(path, "wb") as fh:
            fh.write(data)


def parse_per_class(text: str) -> dict[int, int]:
    """``"0:100,1:100"`` -> {0: 100, 1: 100}."""
    out = {}
    for item in text.replace(" ", "").split(","):
        if item:
            k, v = item.split(":")
            out[int(k)] = int(v)
    return out


def subsample(s: LabeledImageSet, per_class: dict[int, int], seed: int = 0) -> LabeledImageSet:
    """Draw exactly ``per_class[c]`` images of each class without replacement.

    Output is grouped by class in ascending label order; within a class the
    original file order is kept.
    """
    rng = np.random.default_rng(seed)
    chosen = []
    for c in sorted(per_class):
        want = int(per_class[c])
        pool = np.flatnonzero(s.labels == c)
        if want > pool.size:
            raise InsufficientClassSamples(f"class {c}: requested {want}, available {pool.size}")
        if want:
            chosen.append(np.sort(rng.choice(pool, size=want, replace=False)))
    idx = np.concatenate(chosen) if chosen else np.zeros(0, dtype=np.int64)
    rows, cols = s.pixels.shape[1:]
    px = s.pixels[idx] if idx.size else np.zeros((0, rows, cols), dtype=s.pixels.dtype)
    return LabeledImageSet(px, s.labels[idx], s.source_digest, s.indices[idx])


def to_measures(s: LabeledImageSet) -> list[DiscreteMeasure]:
    out = []
    for k in range(len(s)):
        try:
            out.append(image_to_measure(s.image(k)))
        except AllZeroImage as exc:
            raise AllZeroImage(index=k) from exc
    return out
