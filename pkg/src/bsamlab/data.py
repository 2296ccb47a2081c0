"""Datasets: synthetic Gaussian blobs, CSV/IDX loaders, label noise,
deterministic splits and mini-batching."""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ParseError, RangeError
from .rng import stream
from .tensor import Batch, Tensor


@dataclass
class Dataset:
    features: Tensor            # (n, d)
    labels: np.ndarray          # (n,), ints in [0, classes)
    classes: int
    provenance: str             # blobs | csv | idx
    seed: int | None = None

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        n = self.features.shape[0]
        if n < 2:
            raise ConfigError("dataset needs at least 2 samples")
        if self.labels.size != n:
            raise ConfigError(f"{n} rows vs {self.labels.size} labels")
        if self.labels.min() < 0 or self.labels.max() >= self.classes:
            raise ConfigError(f"labels outside [0, {self.classes})")
        if not np.all(np.isfinite(self.features.data)):
            raise ConfigError("non-finite feature values")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        x = self.features.as_array()[idx]
        return Dataset(Tensor.from_array(x), self.labels[idx], self.classes,
                       self.provenance, self.seed)

    def as_batch(self, cap: int | None = None) -> Batch:
        if cap is not None and self.n > cap:
            return Batch(Tensor.from_array(self.features.as_array()[:cap]),
                         self.labels[:cap])
        return Batch(self.features, self.labels)


def _class_means(d: int, classes: int, separation: float, rng) -> np.ndarray:
    """Class means at separation * (centered unit directions)."""
    dirs = np.zeros((classes, d))
    for c in range(classes):
        if classes <= d:
            dirs[c, c] = 1.0
        else:
            v = rng.standard_normal(d)
            dirs[c] = v / np.linalg.norm(v)
    dirs -= dirs.mean(axis=0)
    return separation * dirs


def gen_gaussian_blobs(n: int, d: int, classes: int, separation: float,
                       seed: int) -> Dataset:
    if d < 1:
        raise ConfigError("feature dimension must be >= 1")
    if n < classes:
        raise ConfigError("need at least one sample per class")
    if separation <= 0:
        raise ConfigError("separation must be positive")
    rng = stream(seed, "blobs")
    means = _class_means(d, classes, separation, rng)
    labels = np.arange(n, dtype=np.int64) % classes  # near-equal counts
    feats = means[labels] + rng.standard_normal((n, d))
    return Dataset(Tensor.from_array(feats), labels, classes, "blobs", seed)


def inject_symmetric_noise(labels, classes: int, rate: float, seed: int) -> np.ndarray:
    """Flip each label with probability `rate` to a uniform OTHER class."""
    if not 0.0 <= rate <= 1.0:
        raise RangeError(f"noise rate must be in [0, 1], got {rate}")
    labels = np.asarray(labels, dtype=np.int64).copy()
    rng = stream(seed, "label-noise")
    flip = rng.random(labels.size) < rate
    draws = rng.integers(0, classes - 1, labels.size)
    flipped = np.where(draws >= labels, draws + 1, draws)  # skip original class
    labels[flip] = flipped[flip]
    return labels


def split_indices(n: int, test_fraction: float, seed: int):
    """Seeded exact partition into (train_idx, test_idx)."""
    perm = stream(seed, "split").permutation(n)
    n_test = int(round(n * test_fraction))
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def batches(dataset: Dataset, b: int, epoch_seed: int) -> list:
    """One epoch: a seeded permutation chunked into ceil(n/b) batches."""
    if b < 1:
        raise ConfigError(f"batch size must be >= 1, got {b}")
    if b > dataset.n:
        raise ConfigError(f"batch size {b} exceeds dataset size {dataset.n}")
    perm = stream(epoch_seed, "batch-order").permutation(dataset.n)
    x = dataset.features.as_array()
    out = []
    for start in range(0, dataset.n, b):
        idx = perm[start : start + b]
        out.append(Batch(Tensor.from_array(x[idx]), dataset.labels[idx]))
    return out


CSV_PROVENANCE = "csv"


def load_csv_dataset(path) -> Dataset:
    """CSV with header f0,...,f{d-1},label; float features, int labels."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError(f"{path}: empty file")
    header = lines[0].split(",")
    d = len(header) - 1
    expected = [f"f{i}" for i in range(d)] + ["label"]
    if header != expected:
        raise ParseError(f"{path}:1: bad header {lines[0]!r}")
    feats, labels = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != d + 1:
            raise ParseError(f"{path}:{lineno}: expected {d + 1} cells, got {len(cells)}")
        row = []
        for col, cell in enumerate(cells[:-1]):
            try:
                row.append(float(cell))
            except ValueError:
                raise ParseError(
                    f"{path}:{lineno}: column {col}: non-numeric cell {cell!r}"
                ) from None
        try:
            labels.append(int(cells[-1]))
        except ValueError:
            raise ParseError(
                f"{path}:{lineno}: column {d}: non-integer label {cells[-1]!r}"
            ) from None
        feats.append(row)
    if not feats:
        raise ParseError(f"{path}: no data rows")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min() < 0:
        raise ParseError(f"{path}: negative label")
    classes = int(labels.max()) + 1
    return Dataset(Tensor.from_array(np.asarray(feats)), labels, classes,
                   CSV_PROVENANCE)


def save_csv_dataset(dataset: Dataset, path) -> None:
    x = dataset.features.as_array()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join([f"f{i}" for i in range(dataset.d)] + ["label"]) + "\n")
        for row, lab in zip(x, dataset.labels):
            fh.write(",".join(repr(float(v)) for v in row) + f",{lab}\n")


_IDX_IMAGES_MAGIC = 0x00000803
_IDX_LABELS_MAGIC = 0x00000801


def load_idx(images_path, labels_path) -> Dataset:
    """Standard big-endian IDX3/IDX1 pair; pixels scaled to [0, 1]."""
    with open(images_path, "rb") as fh:
        head = fh.read(16)
        if len(head) < 16:
            raise ParseError(f"{images_path}: truncated header")
        magic, n, rows, cols = struct.unpack(">iiii", head)
        if magic != _IDX_IMAGES_MAGIC:
            raise ParseError(f"{images_path}: offset 0: bad magic {magic:#010x}")
        raw = fh.read(n * rows * cols)
        if len(raw) != n * rows * cols:
            raise ParseError(f"{images_path}: offset 16: expected {n * rows * cols} bytes")
        feats = np.frombuffer(raw, dtype=np.uint8).reshape(n, rows * cols) / 255.0
    with open(labels_path, "rb") as fh:
        head = fh.read(8)
        if len(head) < 8:
            raise ParseError(f"{labels_path}: truncated header")
        magic, nl = struct.unpack(">ii", head)
        if magic != _IDX_LABELS_MAGIC:
            raise ParseError(f"{labels_path}: offset 0: bad magic {magic:#010x}")
        raw = fh.read(nl)
        if len(raw) != nl:
            raise ParseError(f"{labels_path}: offset 8: expected {nl} bytes")
        labels = np.frombuffer(raw, dtype=np.uint8).astype(np.int64)
    if nl != n:
        raise ParseError(f"{labels_path}: {nl} labels for {n} images")
    classes = int(labels.max()) + 1
    return Dataset(Tensor.from_array(feats), labels, classes, "idx")
