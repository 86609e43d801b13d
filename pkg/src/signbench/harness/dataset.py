"""Class-per-directory image datasets and the stratified train/validation split."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from ..numeric import SeededRng

IMAGE_SIZE = 128
IMAGE_SUFFIXES = (".ppm", ".png")


class ConfigError(ValueError):
    """Bad experiment configuration (CLI exit code 1)."""


class DataError(RuntimeError):
    """Missing, empty or undecodable dataset files (CLI exit code 2)."""


@dataclass
class LabeledDataset:
    images: np.ndarray  # (N, H, W, 3) float32 in [0, 1]
    labels: np.ndarray  # (N,)
    class_names: list
    paths: list = field(default_factory=list)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.intp)
        if len(self.images) != len(self.labels):
            raise ValueError("images and labels are not aligned")
        if len(self.labels) and self.labels.max() >= len(self.class_names):
            raise ValueError("label outside the class range")

    def __len__(self):
        return len(self.labels)

    @property
    def class_count(self) -> int:
        return len(self.class_names)

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=np.intp)
        paths = [self.paths[i] for i in idx] if self.paths else []
        return LabeledDataset(self.images[idx], self.labels[idx], list(self.class_names), paths)


def read_image(path, size: int = IMAGE_SIZE) -> np.ndarray:
    """Decode a PPM/PNG file to an RGB float32 array resized to ``size`` x ``size``."""
    try:
        with Image.open(path) as im:
            im = im.convert("RGB")
            if im.size != (size, size):
                im = im.resize((size, size), Image.BILINEAR)
            arr = np.asarray(im, dtype=np.float32)
    except (OSError, ValueError, SyntaxError) as exc:
        raise DataError(f"cannot decode image {path}: {exc}") from exc
    return arr / 255.0


def load_dataset(root, size: int = IMAGE_SIZE, class_names=None) -> LabeledDataset:
    """Load ``root/<class>/*.ppm|*.png``; classes are indexed in sorted name order.

    Passing ``class_names`` pins the label mapping (e.g. so a test set uses
    the training set's indices).
    """
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset root {root} is not a directory")
    dirs = sorted(p.name for p in root.iterdir() if p.is_dir())
    if not dirs:
        raise DataError(f"{root} contains no class directories")
    if class_names is None:
        class_names = dirs
    else:
        unknown = sorted(set(dirs) - set(class_names))
        if unknown:
            raise DataError(f"{root}: classes not in the training set: {unknown}")
    images, labels, paths = [], [], []
    for name in dirs:
        files = sorted(p for p in (root / name).iterdir()
                       if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)
        if not files:
            raise DataError(f"class directory {root / name} holds no .ppm/.png images")
        label = class_names.index(name)
        for f in files:
            images.append(read_image(f, size))
            labels.append(label)
            paths.append(str(f))
    return LabeledDataset(np.stack(images), np.array(labels), list(class_names), paths)


def split(ds: LabeledDataset, train_fraction: float, rng: SeededRng):
    """Stratified split: per class, shuffle and keep ``round(f * n)`` for training."""
    if not 0 < train_fraction < 1:
        raise ConfigError(f"train fraction must be in (0, 1), got {train_fraction}")
    train_idx, val_idx = [], []
    for c in range(ds.class_count):
        members = np.flatnonzero(ds.labels == c)
        if len(members) == 0:
            continue
        if len(members) < 2:
            raise DataError(f"class {ds.class_names[c]!r} has fewer than 2 samples; cannot stratify")
        members = members[rng.permutation(len(members))]
        n_train = int(math.floor(train_fraction * len(members) + 0.5))
        train_idx.extend(members[:n_train].tolist())
        val_idx.extend(members[n_train:].tolist())
    if not train_idx or not val_idx:
        raise DataError("split left the training or validation part empty")
    return ds.subset(sorted(train_idx)), ds.subset(sorted(val_idx))
