"""Datasets with a known fine/coarse label structure.

Provides a synthetic hierarchical Gaussian-mixture generator (the default
test bed: fine classes cluster into well-separated coarse groups) and a
loader for the MNIST IDX binary format.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, replace

import numpy as np

from .hierarchy import Hierarchy
from .rng import Rng, derive_seed

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    """IDX file is malformed (bad magic, truncated, or inconsistent)."""


@dataclass
class LabeledDataset:
    """Features plus clean and (possibly corrupted) observed labels.

    ``noisy_labels`` start out equal to ``clean_labels``; corruption only
    ever rewrites the train split.  Evaluation must use ``clean_labels``.
    """

    features: np.ndarray        # n x d float64
    clean_labels: np.ndarray    # n int64 in [0, num_classes)
    noisy_labels: np.ndarray    # n int64 in [0, num_classes)
    train_indices: np.ndarray   # int64
    test_indices: np.ndarray    # int64
    num_classes: int

    def __post_init__(self):
        n = self.features.shape[0]
        if self.clean_labels.shape != (n,) or self.noisy_labels.shape != (n,):
            raise ValueError("label arrays must match the number of rows")
        for name in ("clean_labels", "noisy_labels"):
            labels = getattr(self, name)
            if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
                raise ValueError(f"{name} outside [0, {self.num_classes})")
        train = set(self.train_indices.tolist())
        test = set(self.test_indices.tolist())
        if train & test:
            raise ValueError("train and test index sets overlap")
        if len(train) != len(self.train_indices) or len(test) != len(self.test_indices):
            raise ValueError("split indices contain duplicates")

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def train_features(self) -> np.ndarray:
        return self.features[self.train_indices]

    def test_features(self) -> np.ndarray:
        return self.features[self.test_indices]

    def with_noisy_labels(self, noisy: np.ndarray) -> "LabeledDataset":
        return replace(self, noisy_labels=noisy)

    def to_csv(self, path) -> None:
        """Export as ``id,split,y_clean,y_noisy,f0..f{d-1}`` rows."""
        split = np.empty(self.features.shape[0], dtype=object)
        split[self.train_indices] = "train"
        split[self.test_indices] = "test"
        header = ["id", "split", "y_clean", "y_noisy"] + [
            f"f{j}" for j in range(self.dim)
        ]
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for i in range(self.features.shape[0]):
                feats = ",".join(repr(float(v)) for v in self.features[i])
                fh.write(
                    f"{i},{split[i]},{self.clean_labels[i]},{self.noisy_labels[i]},{feats}\n"
                )


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the hierarchical Gaussian-mixture generator.

    Coarse groups sit on a scaled simplex so their centers are pairwise
    ``coarse_separation`` apart; each fine class perturbs its group center
    along a random unit direction, giving within-group center distances of
    about ``fine_separation``.  The hierarchy is only meaningful when
    within-group classes are closer than across-group ones.
    """

    num_coarse: int = 4
    fine_per_coarse: int = 2
    dim: int = 20
    coarse_separation: float = 6.0
    fine_separation: float = 2.0
    noise_std: float = 1.0
    n_train: int = 8000
    n_test: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.num_coarse < 2 or self.fine_per_coarse < 1:
            raise ValueError("need >= 2 coarse groups and >= 1 fine class per group")
        if not (self.coarse_separation > self.fine_separation > 0):
            raise ValueError(
                "require coarse_separation > fine_separation > 0, got "
                f"{self.coarse_separation} / {self.fine_separation}"
            )
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if self.dim < self.num_coarse:
            raise ValueError(f"dim={self.dim} too small for {self.num_coarse} coarse groups")
        if self.n_train < 1 or self.n_test < 1:
            raise ValueError("n_train and n_test must be positive")

    @property
    def num_classes(self) -> int:
        return self.num_coarse * self.fine_per_coarse


# parameters every default experiment runs on
REFERENCE_SPEC = SyntheticSpec()


def _class_centers(spec: SyntheticSpec, rng: Rng) -> np.ndarray:
    # basis vectors scaled so pairwise coarse distances equal the target
    coarse = np.zeros((spec.num_coarse, spec.dim))
    for g in range(spec.num_coarse):
        coarse[g, g] = spec.coarse_separation / np.sqrt(2.0)
    centers = np.zeros((spec.num_classes, spec.dim))
    radius = spec.fine_separation / np.sqrt(2.0)
    for g in range(spec.num_coarse):
        for j in range(spec.fine_per_coarse):
            direction = rng.normals(spec.dim)
            direction /= np.linalg.norm(direction)
            centers[g * spec.fine_per_coarse + j] = coarse[g] + radius * direction
    return centers


def generate_synthetic(spec: SyntheticSpec) -> tuple[LabeledDataset, Hierarchy]:
    """Sample the mixture; returns the dataset and its planted hierarchy."""
    k = spec.num_classes
    rng = Rng(derive_seed(spec.seed, "synthetic"))
    centers = _class_centers(spec, rng)

    n = spec.n_train + spec.n_test
    # round-robin assignment keeps every class count within 1 of n/K
    labels = np.arange(n, dtype=np.int64) % k
    noise = rng.normals(n * spec.dim).reshape(n, spec.dim)
    features = centers[labels] + spec.noise_std * noise

    hierarchy = Hierarchy(
        np.arange(k, dtype=np.int64) // spec.fine_per_coarse, spec.num_coarse
    )
    dataset = LabeledDataset(
        features=np.ascontiguousarray(features),
        clean_labels=labels,
        noisy_labels=labels.copy(),
        train_indices=np.arange(spec.n_train, dtype=np.int64),
        test_indices=np.arange(spec.n_train, n, dtype=np.int64),
        num_classes=k,
    )
    return dataset, hierarchy


def one_hot(labels, num_classes: int) -> np.ndarray:
    """n x K float64 matrix with a single 1 per row."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1:
        raise ValueError("labels must be a 1-D sequence")
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        bad = labels[(labels < 0) | (labels >= num_classes)][0]
        raise ValueError(f"label {bad} outside [0, {num_classes})")
    out = np.zeros((labels.shape[0], num_classes), dtype=np.float64)
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def _open_maybe_gzip(path):
    with open(path, "rb") as fh:
        head = fh.read(2)
    if head == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_exact(fh, count: int, path) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise IdxFormatError(f"{path}: truncated (wanted {count} bytes, got {len(data)})")
    return data


def read_idx_images(path) -> np.ndarray:
    """Pixels of an IDX image file as n x (rows*cols) float64 in [0, 1]."""
    with _open_maybe_gzip(path) as fh:
        magic, count, rows, cols = struct.unpack(">IIII", _read_exact(fh, 16, path))
        if magic != IDX_IMAGE_MAGIC:
            raise IdxFormatError(
                f"{path}: bad image magic 0x{magic:08x}, expected 0x{IDX_IMAGE_MAGIC:08x}"
            )
        raw = _read_exact(fh, count * rows * cols, path)
    pixels = np.frombuffer(raw, dtype=np.uint8).reshape(count, rows * cols)
    return pixels.astype(np.float64) / 255.0


def read_idx_labels(path) -> np.ndarray:
    with _open_maybe_gzip(path) as fh:
        magic, count = struct.unpack(">II", _read_exact(fh, 8, path))
        if magic != IDX_LABEL_MAGIC:
            raise IdxFormatError(
                f"{path}: bad label magic 0x{magic:08x}, expected 0x{IDX_LABEL_MAGIC:08x}"
            )
        raw = _read_exact(fh, count, path)
    return np.frombuffer(raw, dtype=np.uint8).astype(np.int64)


def load_mnist_idx(images_path, labels_path,
                   test_images_path=None, test_labels_path=None) -> LabeledDataset:
    """Load MNIST-style IDX files into a dataset.

    With only the first pair, every example lands in the train split; pass
    the test pair as well to get the standard 60000/10000 layout.
    """
    features = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if features.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"image/label count mismatch: {features.shape[0]} vs {labels.shape[0]}"
        )
    if (test_images_path is None) != (test_labels_path is None):
        raise ValueError("provide both test paths or neither")
    if test_images_path is not None:
        test_features = read_idx_images(test_images_path)
        test_labels = read_idx_labels(test_labels_path)
        if test_features.shape[0] != test_labels.shape[0]:
            raise IdxFormatError(
                "image/label count mismatch: "
                f"{test_features.shape[0]} vs {test_labels.shape[0]}"
            )
        n_train = features.shape[0]
        features = np.vstack([features, test_features])
        labels = np.concatenate([labels, test_labels])
        test_idx = np.arange(n_train, features.shape[0], dtype=np.int64)
    else:
        n_train = features.shape[0]
        test_idx = np.arange(0, dtype=np.int64)
    return LabeledDataset(
        features=np.ascontiguousarray(features),
        clean_labels=labels,
        noisy_labels=labels.copy(),
        train_indices=np.arange(n_train, dtype=np.int64),
        test_indices=test_idx,
        num_classes=10,
    )
