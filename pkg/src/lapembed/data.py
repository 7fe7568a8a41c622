"""Synthetic datasets, vector-space augmentation, paired-batch streams,
and CSV dataset I/O.

Labels, when present, are for evaluation only: the batch stream exposes
features and source pairing and nothing else, so the training path cannot
read labels by construction.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np


class DataError(ValueError):
    """Invalid dataset construction or parse failure."""


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # N x d
    labels: Optional[np.ndarray] = None  # length N, ints in 0..class_count-1
    class_count: Optional[int] = None

    def __post_init__(self):
        f = np.asarray(self.features, dtype=float)
        if f.ndim != 2 or f.shape[0] < 1:
            raise DataError("features must be a nonempty N x d matrix")
        if not np.isfinite(f).all():
            raise DataError("features contain non-finite values")
        object.__setattr__(self, "features", f)
        if self.labels is not None:
            y = np.asarray(self.labels, dtype=int)
            if y.shape != (f.shape[0],):
                raise DataError("labels length must match feature rows")
            c = self.class_count if self.class_count is not None else int(y.max()) + 1
            if y.min() < 0 or y.max() >= c:
                raise DataError(f"labels must lie in 0..{c - 1}")
            if len(np.unique(y)) != c:
                raise DataError("every class must be nonempty")
            object.__setattr__(self, "labels", y)
            object.__setattr__(self, "class_count", c)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class AugmentationPolicy:
    """Vector-space stand-ins for image augmentations: global rescaling,
    additive noise, and coordinate zero-masking (information removal)."""

    noise_sigma: float = 0.1
    scale_range: tuple[float, float] = (0.8, 1.2)
    mask_prob: float = 0.1

    def __post_init__(self):
        lo, hi = self.scale_range
        if self.noise_sigma < 0:
            raise DataError("noise_sigma must be >= 0")
        if not (0 < lo <= hi):
            raise DataError("scale_range must satisfy 0 < lo <= hi")
        if not 0.0 <= self.mask_prob < 1.0:
            raise DataError("mask_prob must be in [0, 1)")


NULL_POLICY = AugmentationPolicy(noise_sigma=0.0, scale_range=(1.0, 1.0), mask_prob=0.0)


def default_policy(ds: Dataset) -> AugmentationPolicy:
    """Noise scaled to 10% of the mean per-dimension spread of the data."""
    sigma = 0.1 * float(ds.features.std(axis=0).mean())
    return AugmentationPolicy(noise_sigma=sigma, scale_range=(0.8, 1.2), mask_prob=0.1)


def generate_blobs(classes: int, per_class: int, dim: int, separation: float,
                   seed: int = 0) -> Dataset:
    """Isotropic unit-noise Gaussians with class means at separation * e_c
    (axis directions, cycling through the available axes)."""
    if classes < 2 or per_class < 1 or dim < 1:
        raise DataError("need classes >= 2, per_class >= 1, dim >= 1")
    rng = np.random.default_rng(seed)
    feats = []
    labels = []
    for c in range(classes):
        mean = np.zeros(dim)
        mean[c % dim] += separation * (1 + c // dim)
        feats.append(mean + rng.standard_normal((per_class, dim)))
        labels.extend([c] * per_class)
    return Dataset(np.vstack(feats), np.array(labels), classes)


def generate_moons(per_class: int, noise: float, seed: int = 0) -> Dataset:
    """Two interleaved unit semicircular arcs with isotropic noise."""
    if per_class < 1 or noise < 0:
        raise DataError("need per_class >= 1, noise >= 0")
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.0, np.pi, size=per_class)
    upper = np.column_stack([np.cos(t), np.sin(t)])
    t2 = rng.uniform(0.0, np.pi, size=per_class)
    lower = np.column_stack([1.0 - np.cos(t2), 0.5 - np.sin(t2)])
    pts = np.vstack([upper, lower])
    pts = pts + noise * rng.standard_normal(pts.shape)
    labels = np.array([0] * per_class + [1] * per_class)
    return Dataset(pts, labels, 2)


def generate_rings(classes: int, per_class: int, noise: float,
                   seed: int = 0) -> Dataset:
    """Concentric circles at radii 1, 3, 5, ... with isotropic noise."""
    if classes < 2 or per_class < 1 or noise < 0:
        raise DataError("need classes >= 2, per_class >= 1, noise >= 0")
    rng = np.random.default_rng(seed)
    feats = []
    labels = []
    for c in range(classes):
        radius = 1.0 + 2.0 * c
        t = rng.uniform(0.0, 2.0 * np.pi, size=per_class)
        ring = radius * np.column_stack([np.cos(t), np.sin(t)])
        feats.append(ring + noise * rng.standard_normal(ring.shape))
        labels.extend([c] * per_class)
    return Dataset(np.vstack(feats), np.array(labels), classes)


def augment(x: np.ndarray, policy: AugmentationPolicy,
            rng: np.random.Generator) -> np.ndarray:
    """Scale, add noise, then mask, in that order."""
    x = np.asarray(x, dtype=float)
    if not np.isfinite(x).all():
        raise DataError("augmentation input must be finite")
    lo, hi = policy.scale_range
    out = x * rng.uniform(lo, hi)
    if policy.noise_sigma > 0:
        out = out + policy.noise_sigma * rng.standard_normal(x.shape)
    if policy.mask_prob > 0:
        out = out * (rng.uniform(size=x.shape) >= policy.mask_prob)
    return out


def paired_batches(ds: Dataset, policy: AugmentationPolicy, batch_size: int,
                   seed: int = 0, epochs: int = 1
                   ) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Stream of (x, x_pos, source_ids) batches.

    Each epoch shuffles the sources and partitions them into full batches
    (a trailing short batch is dropped). Rows x[i] and x_pos[i] are two
    independent augmentations of source row source_ids[i]. Labels are not
    exposed.
    """
    if batch_size < 2:
        raise DataError("batch size must be >= 2")
    if batch_size > ds.n:
        raise DataError(f"batch size {batch_size} exceeds dataset size {ds.n}")
    rng = np.random.default_rng(seed)
    for _ in range(epochs):
        order = rng.permutation(ds.n)
        for start in range(0, ds.n - batch_size + 1, batch_size):
            ids = order[start:start + batch_size]
            rows = ds.features[ids]
            x = np.stack([augment(r, policy, rng) for r in rows])
            x_pos = np.stack([augment(r, policy, rng) for r in rows])
            yield x, x_pos, ids


def save_csv(ds: Dataset, path) -> None:
    """One row per sample; with labels, the label is the first column."""
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(ds.n):
            cells = [repr(float(v)) for v in ds.features[i]]
            if ds.labels is not None:
                cells.insert(0, str(int(ds.labels[i])))
            fh.write(",".join(cells) + "\n")


def load_csv(path, has_label_column: bool = False) -> Dataset:
    feats = []
    labels = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise DataError(f"line {lineno}: ragged row ({len(cells)} cells, expected {width})")
            try:
                if has_label_column:
                    label_cell, feat_cells = cells[0], cells[1:]
                    label = int(label_cell)
                    if label < 0:
                        raise ValueError(f"negative label {label}")
                    labels.append(label)
                else:
                    feat_cells = cells
                feats.append([float(c) for c in feat_cells])
            except ValueError as exc:
                raise DataError(f"line {lineno}: {exc}") from exc
    if not feats:
        raise DataError("empty dataset file")
    if has_label_column:
        return Dataset(np.array(feats), np.array(labels))
    return Dataset(np.array(feats))
