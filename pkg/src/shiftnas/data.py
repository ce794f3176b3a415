"""Datasets: seeded synthetic classification tasks and CSV ingestion.

All tasks are small tabular classification problems. Features are float64
matrices (rows = examples), labels are contiguous integer classes, and the
train/val/test split is stored as index arrays on the dataset itself so
every consumer sees the same split.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DatasetError

SPLIT_NAMES = ("train", "val", "test")
SYNTHETIC_PRESETS = ("blobs-easy", "blobs-hard", "rings")


@dataclass
class Dataset:
    name: str
    features: np.ndarray
    labels: np.ndarray
    splits: dict
    num_classes: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.features.shape[0]
        if self.labels.shape != (n,):
            raise DatasetError(f"{n} rows but {self.labels.shape} labels")
        seen = np.concatenate([self.splits[s] for s in SPLIT_NAMES])
        if len(seen) != n or len(np.unique(seen)) != n:
            raise DatasetError("splits must be disjoint and cover all rows")
        for split in ("train", "val"):
            present = set(self.labels[self.splits[split]].tolist())
            missing = set(range(self.num_classes)) - present
            if missing:
                raise DatasetError(
                    f"classes {sorted(missing)} absent from {split} split"
                )

    @property
    def input_dim(self) -> int:
        return int(self.features.shape[1])

    def split_arrays(self, split: str):
        idx = self.splits[split]
        return self.features[idx], self.labels[idx]


def stratified_splits(
    labels: np.ndarray, rng: np.random.Generator, fractions=(0.70, 0.15, 0.15)
) -> dict:
    """Per-class seeded shuffle into train/val/test at the given fractions.

    Stratifying keeps every class present in train and val, which plain
    shuffling cannot guarantee for rare classes.
    """
    train, val, test = [], [], []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(len(idx))]
        n = len(idx)
        n_train = max(1, int(round(fractions[0] * n)))
        n_val = max(1, int(round(fractions[1] * n)))
        if n_train + n_val > n:
            raise DatasetError(
                f"class {cls} has only {n} examples; cannot cover train and val"
            )
        train.append(idx[:n_train])
        val.append(idx[n_train : n_train + n_val])
        test.append(idx[n_train + n_val :])
    return {
        "train": np.sort(np.concatenate(train)),
        "val": np.sort(np.concatenate(val)),
        "test": np.sort(np.concatenate(test)),
    }


def _blobs_easy(seed: int) -> Dataset:
    """Well-separated Gaussian blobs; even linear genomes can ace this."""
    rng = np.random.default_rng(seed)
    num_classes, dim, per_class = 10, 16, 300
    means = rng.normal(0.0, 1.0, size=(num_classes, dim))
    means *= 8.0 / np.linalg.norm(means, axis=1, keepdims=True)
    feats = []
    labels = []
    for cls in range(num_classes):
        feats.append(rng.normal(0.0, 1.0, size=(per_class, dim)) + means[cls])
        labels.append(np.full(per_class, cls, dtype=np.int64))
    features = np.concatenate(feats)
    labels = np.concatenate(labels)
    order = rng.permutation(len(labels))
    features, labels = features[order], labels[order]
    return Dataset(
        name="blobs-easy",
        features=features,
        labels=labels,
        splits=stratified_splits(labels, rng),
        num_classes=num_classes,
        meta={"seed": seed, "preset": "blobs-easy"},
    )


def _blobs_hard(seed: int) -> Dataset:
    """Overlapping Gaussian mixture: each class is a pair of antipodal
    sub-clusters on a 2-d informative plane embedded in 16-d.

    The antipodal pairing makes the class boundary nonlinear (a linear model
    cannot assign both sub-clusters of a class), so architecture quality
    carries real signal while the data stays plain Gaussian blobs.
    """
    rng = np.random.default_rng(seed)
    num_classes, dim, per_class = 10, 16, 300
    angles = rng.uniform(0.0, 2.0 * np.pi, size=num_classes)
    radii = rng.uniform(3.0, 6.0, size=num_classes)
    feats = []
    labels = []
    for cls in range(num_classes):
        for ang in (angles[cls], angles[cls] + np.pi):
            n = per_class // 2
            center = radii[cls] * np.array([np.cos(ang), np.sin(ang)])
            feats.append(rng.normal(0.0, 0.45, size=(n, 2)) + center)
            labels.append(np.full(n, cls, dtype=np.int64))
    plane = np.concatenate(feats)
    labels = np.concatenate(labels)
    basis, _ = np.linalg.qr(rng.normal(size=(dim, 2)))
    features = plane @ basis.T + rng.normal(0.0, 0.25, size=(len(labels), dim))
    order = rng.permutation(len(labels))
    features, labels = features[order], labels[order]
    return Dataset(
        name="blobs-hard",
        features=features,
        labels=labels,
        splits=stratified_splits(labels, rng),
        num_classes=num_classes,
        meta={"seed": seed, "preset": "blobs-hard"},
    )


def _rings(seed: int) -> Dataset:
    """Concentric shells in 2-d, rotated into 16-d; radius decides the class.

    No linear map separates the rings, so identity-only genomes top out well
    below architectures with dense nonlinear choices.
    """
    rng = np.random.default_rng(seed)
    num_classes, dim, per_class = 4, 16, 300
    radii = np.array([1.0, 2.2, 3.4, 4.6])
    pts = []
    labels = []
    for cls in range(num_classes):
        theta = rng.uniform(0.0, 2.0 * np.pi, size=per_class)
        r = radii[cls] + rng.normal(0.0, 0.18, size=per_class)
        pts.append(np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1))
        labels.append(np.full(per_class, cls, dtype=np.int64))
    plane = np.concatenate(pts)
    labels = np.concatenate(labels)
    # seeded random orthonormal embedding of the plane into 16 dims
    basis, _ = np.linalg.qr(rng.normal(size=(dim, 2)))
    features = plane @ basis.T + rng.normal(0.0, 0.05, size=(len(labels), dim))
    order = rng.permutation(len(labels))
    features, labels = features[order], labels[order]
    return Dataset(
        name="rings",
        features=features,
        labels=labels,
        splits=stratified_splits(labels, rng),
        num_classes=num_classes,
        meta={"seed": seed, "preset": "rings"},
    )


def generate_synthetic(preset: str, seed: int) -> Dataset:
    """Seeded synthetic dataset; identical (preset, seed) reproduce bitwise."""
    if preset == "blobs-easy":
        return _blobs_easy(seed)
    if preset == "blobs-hard":
        return _blobs_hard(seed)
    if preset == "rings":
        return _rings(seed)
    raise DatasetError(
        f"unknown synthetic preset {preset!r}; choose from {list(SYNTHETIC_PRESETS)}"
    )


def save_csv(dataset: Dataset, path) -> None:
    """Write features, labels and split assignment; load_csv round-trips it."""
    dim = dataset.input_dim
    split_of = np.empty(len(dataset.labels), dtype=object)
    for split in SPLIT_NAMES:
        split_of[dataset.splits[split]] = split
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join([f"f{i}" for i in range(dim)] + ["label", "split"]) + "\n")
        for row, label, split in zip(dataset.features, dataset.labels, split_of):
            cells = [repr(float(v)) for v in row]
            fh.write(",".join(cells + [str(int(label)), split]) + "\n")


def load_csv(path, seed: int = 0) -> Dataset:
    """Parse a feature CSV: header f0..f{d-1},label[,split].

    Without a split column the rows are split 70/15/15 by seeded shuffle
    (stratified per class). Non-contiguous labels are remapped to 0..K-1 and
    the mapping recorded in the dataset meta.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    if not lines:
        raise DatasetError(f"{path}: empty file")
    header = [h.strip() for h in lines[0].split(",")]
    has_split = header[-1] == "split"
    feature_cols = header[:-2] if has_split else header[:-1]
    label_col = header[-2] if has_split else header[-1]
    expected = [f"f{i}" for i in range(len(feature_cols))]
    if feature_cols != expected or label_col != "label" or not feature_cols:
        raise DatasetError(
            f"{path}: line 1: header must be f0..f{{d-1}},label[,split], got {lines[0]!r}"
        )
    dim = len(feature_cols)
    width = dim + (2 if has_split else 1)
    features, raw_labels, split_tags = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != width:
            raise DatasetError(
                f"{path}: line {lineno}: expected {width} cells, got {len(cells)}"
            )
        try:
            features.append([float(v) for v in cells[:dim]])
            label = int(cells[dim])
        except ValueError as exc:
            raise DatasetError(f"{path}: line {lineno}: {exc}") from exc
        if label < 0:
            raise DatasetError(f"{path}: line {lineno}: negative label {label}")
        raw_labels.append(label)
        if has_split:
            tag = cells[dim + 1].strip()
            if tag not in SPLIT_NAMES:
                raise DatasetError(f"{path}: line {lineno}: unknown split {tag!r}")
            split_tags.append(tag)
    if not features:
        raise DatasetError(f"{path}: no data rows")
    features = np.asarray(features, dtype=np.float64)
    raw_labels = np.asarray(raw_labels, dtype=np.int64)

    meta: dict = {"source": str(path)}
    distinct = np.unique(raw_labels)
    if not np.array_equal(distinct, np.arange(len(distinct))):
        mapping = {int(old): new for new, old in enumerate(distinct)}
        labels = np.array([mapping[int(v)] for v in raw_labels], dtype=np.int64)
        meta["label_map"] = {str(k): v for k, v in mapping.items()}
        meta["warnings"] = [
            f"non-contiguous labels {distinct.tolist()} remapped to 0..{len(distinct) - 1}"
        ]
    else:
        labels = raw_labels
    num_classes = len(distinct)

    if has_split:
        splits = {
            s: np.flatnonzero(np.array(split_tags, dtype=object) == s) for s in SPLIT_NAMES
        }
    else:
        splits = stratified_splits(labels, np.random.default_rng(seed))
    return Dataset(
        name=os.path.splitext(os.path.basename(str(path)))[0],
        features=features,
        labels=labels,
        splits=splits,
        num_classes=num_classes,
        meta=meta,
    )
