"""
MNIST in IDX format, read pixel by pixel.

IDX files are big-endian: images carry magic 0x00000803 followed by u32
count, rows and cols; labels carry magic 0x00000801 followed by u32 count.
The payload is one unsigned byte per pixel or label.
"""

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from urnn.core.errors import DataError, FormatError
from urnn.tasks.batch import TaskBatch

logger = logging.getLogger(__name__)

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
N_CLASSES = 10

TRAIN_FILES = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte")
TEST_FILES = ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")

PathLike = Union[str, Path]


@dataclass(frozen=True)
class MnistSet:
    """Images flattened row-major (count, rows*cols), labels, and the reading-order permutation if any"""

    images: np.ndarray
    labels: np.ndarray
    rows: int
    cols: int
    permutation: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, count: int) -> "MnistSet":
        return MnistSet(self.images[:count], self.labels[:count], self.rows, self.cols, self.permutation)


def _read_header(data: bytes, fmt: str, path: PathLike, expected_magic: int) -> Tuple[int, ...]:
    size = struct.calcsize(fmt)
    if len(data) < size:
        raise FormatError(f"{path}: truncated header ({len(data)} of {size} bytes)")
    fields = struct.unpack_from(fmt, data)
    if fields[0] != expected_magic:
        raise FormatError(f"{path}: bad magic number 0x{fields[0]:08x}, expected 0x{expected_magic:08x}")
    return fields


def _read_payload(data: bytes, offset: int, count: int, path: PathLike, what: str) -> np.ndarray:
    available = len(data) - offset
    if available < count:
        raise FormatError(f"{path}: truncated {what} ({available} of {count} bytes)")
    if available > count:
        raise FormatError(f"{path}: {available - count} unexpected trailing bytes after {what}")
    return np.frombuffer(data, dtype=np.uint8, count=count, offset=offset).copy()


def _read_file(path: PathLike) -> bytes:
    try:
        return Path(path).read_bytes()
    except FileNotFoundError:
        raise DataError(f"MNIST file not found: {path}") from None


def load_mnist_idx(images_path: PathLike, labels_path: PathLike) -> MnistSet:
    image_bytes = _read_file(images_path)
    label_bytes = _read_file(labels_path)

    _, count, rows, cols = _read_header(image_bytes, ">IIII", images_path, IMAGES_MAGIC)
    _, label_count = _read_header(label_bytes, ">II", labels_path, LABELS_MAGIC)
    if count != label_count:
        raise FormatError(f"count mismatch: {count} images in {images_path}, {label_count} labels in {labels_path}")

    pixels = _read_payload(image_bytes, 16, count * rows * cols, images_path, "pixel data")
    labels = _read_payload(label_bytes, 8, label_count, labels_path, "label data")
    if labels.size and labels.max() >= N_CLASSES:
        raise FormatError(f"{labels_path}: label value {labels.max()} outside 0..9")

    logger.info("loaded %d images of %dx%d from %s", count, rows, cols, images_path)
    return MnistSet(pixels.reshape(count, rows * cols), labels, rows, cols)


def load_mnist_dir(directory: PathLike, train: bool = True) -> MnistSet:
    names = TRAIN_FILES if train else TEST_FILES
    root = Path(directory)
    return load_mnist_idx(root / names[0], root / names[1])


def pixel_permutation(n_pixels: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).permutation(n_pixels)


def inverse_permutation(permutation: np.ndarray) -> np.ndarray:
    return np.argsort(permutation)


def permute_pixels(s: MnistSet, seed: int, identity: bool = False) -> MnistSet:
    """Attach one permutation drawn from seed (or the identity) to the reading order.

    Images stay as stored; pixel_sequence applies the permutation after the
    bottom-to-top reversal. Permuting twice composes the two permutations.
    """
    n_pixels = s.rows * s.cols
    perm = np.arange(n_pixels) if identity else pixel_permutation(n_pixels, seed)
    combined = perm if s.permutation is None else s.permutation[perm]
    return MnistSet(s.images, s.labels, s.rows, s.cols, combined)


def unpermute_pixels(s: MnistSet) -> MnistSet:
    return MnistSet(s.images, s.labels, s.rows, s.cols)


def pixel_sequence(s: MnistSet, indices: np.ndarray) -> np.ndarray:
    """Pixels scaled to [0, 1] in reading order, shape (len(indices), rows*cols).

    Images are read left to right, bottom to top, and that sequence is then
    reindexed by the permutation if one is set.
    """
    images = s.images[indices].astype(float) / 255.0
    seq = images.reshape(-1, s.rows, s.cols)[:, ::-1, :].reshape(len(indices), -1)
    if s.permutation is not None:
        seq = seq[:, s.permutation]
    return seq


def mnist_task_batch(s: MnistSet, indices: np.ndarray) -> TaskBatch:
    """One pixel per step (n_in = 1), label predicted at the final step"""
    pixels = pixel_sequence(s, indices)
    return TaskBatch(pixels[..., None], s.labels[indices].astype(np.int64), "classification", n_classes=N_CLASSES)
