"""Datasets, train/test splits and mini-batches."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ContractError, FormatError, IdxIOError, ShapeError
from .idx import IMAGES_MAGIC, LABELS_MAGIC, read_idx

IMAGE_NAMES = ("images-idx3-ubyte.gz", "images-idx3-ubyte", "train-images-idx3-ubyte.gz", "train-images-idx3-ubyte")
LABEL_NAMES = ("labels-idx1-ubyte.gz", "labels-idx1-ubyte", "train-labels-idx1-ubyte.gz", "train-labels-idx1-ubyte")


@dataclass(frozen=True)
class Dataset:
    images: np.ndarray  # N x C x H x W, values in [0, 1]
    labels: np.ndarray  # N, int64
    num_classes: int = 10

    def __post_init__(self):
        if self.images.ndim != 4 or self.labels.shape != (self.images.shape[0],):
            raise ShapeError(f"dataset needs N x C x H x W images and N labels, got "
                             f"{self.images.shape} and {self.labels.shape}")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ContractError(f"labels must lie in [0, {self.num_classes})")

    def __len__(self):
        return self.labels.shape[0]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.images[idx], self.labels[idx], self.num_classes)

    def rotated(self, quarter_turns: int = 1) -> "Dataset":
        """Every image turned by ``quarter_turns`` x 90 degrees (counter-clockwise)."""
        return Dataset(np.ascontiguousarray(np.rot90(self.images, quarter_turns, axes=(2, 3))),
                       self.labels, self.num_classes)


@dataclass(frozen=True)
class SplitConfig:
    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ContractError("train fraction must lie in (0, 1)")


def _find(directory: Path, names) -> Path:
    for n in names:
        if (directory / n).exists():
            return directory / n
    raise IdxIOError(f"no IDX file among {', '.join(names)} in {directory}")


def load_idx(images_path, labels_path=None) -> Dataset:
    """Images (magic 2051) and labels (magic 2049) as a Dataset with pixels byte / 255.

    ``images_path`` may also be a directory holding both files.
    """
    images_path = Path(images_path)
    if images_path.is_dir():
        directory = images_path
        images_path, labels_path = _find(directory, IMAGE_NAMES), _find(directory, LABEL_NAMES)
    if labels_path is None:
        raise ContractError("labels file missing")
    raw = read_idx(images_path, expect=IMAGES_MAGIC)
    labels = read_idx(labels_path, expect=LABELS_MAGIC).astype(np.int64)
    if raw.shape[0] != labels.shape[0]:
        raise FormatError(f"{raw.shape[0]} images but {labels.shape[0]} labels")
    images = raw.astype(np.float64)[:, None] / 255.0
    return Dataset(images, labels, max(10, int(labels.max(initial=-1)) + 1))


def split_dataset(data: Dataset, cfg: SplitConfig = SplitConfig()) -> tuple[Dataset, Dataset]:
    """Seeded shuffle, then the first round(fraction N) samples train, the rest test."""
    n = len(data)
    if n < 2:
        raise ContractError("need at least two samples to split")
    n_train = min(max(int(round(cfg.train_fraction * n)), 1), n - 1)
    perm = np.random.default_rng(cfg.seed).permutation(n)
    return data.subset(np.sort(perm[:n_train])), data.subset(np.sort(perm[n_train:]))


def make_batches(n: int, batch_size: int, epoch_seed) -> list[np.ndarray]:
    """Random disjoint cover of range(n) by ceil(n / batch_size) batches.

    The remainder is spread so batch sizes differ by at most one
    (n=10, size 3 gives 3, 3, 2, 2).
    """
    if not 1 <= batch_size <= n:
        raise ContractError(f"batch size must be in [1, {n}]")
    count = math.ceil(n / batch_size)
    perm = np.random.default_rng(epoch_seed).permutation(n)
    return [np.asarray(b) for b in np.array_split(perm, count)]
