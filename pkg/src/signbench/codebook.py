"""Visual vocabulary: k-means over descriptors and word-frequency histograms."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numeric import SeededRng

MAGIC = b"BOVW"
FORMAT_VERSION = 1
MAX_TRAINING_DESCRIPTORS = 200_000


@dataclass
class Vocabulary:
    centroids: np.ndarray  # (k, dim)
    objective: float = float("nan")
    iterations: int = 0
    history: list = field(default_factory=list, repr=False)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


@dataclass
class BowHistogram:
    frequencies: np.ndarray
    label: int | None = None


def squared_distances(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Pairwise squared L2 distances, shape (n, k), clamped at 0."""
    d = (
        np.einsum("ij,ij->i", x, x)[:, None]
        - 2.0 * (x @ centroids.T)
        + np.einsum("ij,ij->i", centroids, centroids)[None, :]
    )
    np.maximum(d, 0.0, out=d)
    return d


def _assign_all(x, centroids):
    """Nearest centroid per row (lowest index on ties) and its squared distance.

    Rows whose two best candidates are nearly tied under the fast
    expansion are re-scored with exact differences so the tie rule holds.
    """
    d = squared_distances(x, centroids)
    labels = np.argmin(d, axis=1)
    if centroids.shape[0] > 1:
        part = np.partition(d, 1, axis=1)
        scale = np.einsum("ij,ij->i", x, x) + part[:, 1] + 1.0
        close = np.flatnonzero(part[:, 1] - part[:, 0] <= 1e-9 * scale)
        for i in close:
            exact = ((centroids - x[i]) ** 2).sum(axis=1)
            labels[i] = int(np.argmin(exact))
    dist = ((x - centroids[labels]) ** 2).sum(axis=1)
    return labels, dist


def kmeans_plus_plus(x: np.ndarray, k: int, rng: SeededRng) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    closest = ((x - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total <= 0:
            # every point already coincides with a center
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers[j] = x[idx]
        np.minimum(closest, ((x - centers[j]) ** 2).sum(axis=1), out=closest)
    return centers


def _update(x, labels, dist, centroids):
    """Mean update; empty clusters take the point farthest from its centroid."""
    k, dim = centroids.shape
    counts = np.bincount(labels, minlength=k)
    sums = np.zeros((k, dim))
    np.add.at(sums, labels, x)
    new = centroids.copy()
    filled = counts > 0
    new[filled] = sums[filled] / counts[filled, None]
    if not filled.all():
        dist = dist.copy()
        for j in np.flatnonzero(~filled):
            far = int(np.argmax(dist))
            new[j] = x[far]
            dist[far] = -1.0
    return new


def kmeans_fit(
    descriptors,
    k: int,
    rng: SeededRng,
    max_iters: int = 300,
    tol: float = 1e-6,
    init: np.ndarray | None = None,
) -> Vocabulary:
    """Lloyd iterations from a k-means++ start.

    Stops when the relative objective change falls below ``tol`` or after
    ``max_iters`` assignment/update rounds. ``history`` holds the
    objective measured after every assignment step.
    """
    x = np.asarray(descriptors, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if k < 1:
        raise ValueError("k must be at least 1")
    if x.shape[0] < k:
        raise ValueError(f"need at least k={k} points, got {x.shape[0]}")

    centroids = kmeans_plus_plus(x, k, rng) if init is None else np.array(init, dtype=np.float64)
    labels, dist = _assign_all(x, centroids)
    objective = float(dist.sum())
    history = [objective]
    it = 0
    while it < max_iters:
        it += 1
        centroids = _update(x, labels, dist, centroids)
        labels, dist = _assign_all(x, centroids)
        new_obj = float(dist.sum())
        history.append(new_obj)
        change = abs(objective - new_obj)
        objective = new_obj
        if change <= tol * max(objective, np.finfo(float).tiny):
            break
    return Vocabulary(centroids, objective, it, history)


def sample_descriptors(descriptors: np.ndarray, rng: SeededRng,
                       limit: int = MAX_TRAINING_DESCRIPTORS) -> np.ndarray:
    """Uniform subsample without replacement when the pool exceeds ``limit``."""
    if len(descriptors) <= limit:
        return descriptors
    idx = np.sort(rng.choice(len(descriptors), size=limit, replace=False))
    return descriptors[idx]


def assign(descriptor, vocab: Vocabulary) -> int:
    d = np.asarray(descriptor, dtype=np.float64)
    if d.shape != (vocab.dim,):
        raise ValueError(f"descriptor has shape {d.shape}, vocabulary dim is {vocab.dim}")
    dist = ((vocab.centroids - d) ** 2).sum(axis=1)
    return int(np.argmin(dist))


def assign_many(descriptors, vocab: Vocabulary) -> np.ndarray:
    x = np.asarray(descriptors, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != vocab.dim:
        raise ValueError(f"descriptors have shape {x.shape}, vocabulary dim is {vocab.dim}")
    return _assign_all(x, vocab.centroids)[0]


def encode_histogram(ds, vocab: Vocabulary, label: int | None = None) -> BowHistogram:
    desc = ds.descriptors if hasattr(ds, "descriptors") else np.asarray(ds)
    if len(desc) == 0:
        raise ValueError("cannot encode an empty descriptor set")
    counts = np.bincount(assign_many(desc, vocab), minlength=vocab.k)
    return BowHistogram(counts / counts.sum(), label)


def save_vocabulary(vocab: Vocabulary, path) -> None:
    path = Path(path)
    header = MAGIC + struct.pack("<III", FORMAT_VERSION, vocab.k, vocab.dim)
    try:
        path.write_bytes(header + vocab.centroids.astype("<f4").tobytes())
    except OSError as exc:
        raise OSError(f"cannot write vocabulary to {path}: {exc}") from exc


def load_vocabulary(path) -> Vocabulary:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a vocabulary file")
    version, k, dim = struct.unpack("<III", raw[4:16])
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    body = raw[16:]
    if len(body) != 4 * k * dim:
        raise ValueError(f"{path}: truncated centroid block")
    centroids = np.frombuffer(body, dtype="<f4").reshape(k, dim).astype(np.float64)
    return Vocabulary(centroids)
