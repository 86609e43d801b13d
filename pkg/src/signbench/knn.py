"""Brute-force k-nearest-neighbour classification of BOVW histograms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DistanceMetric:
    kind: str = "manhattan"
    order: float = 1.0

    def __post_init__(self):
        if self.kind not in ("manhattan", "euclidean", "minkowski"):
            raise ValueError(f"unknown metric {self.kind!r}")
        if self.kind == "minkowski" and not self.order >= 1:
            raise ValueError(f"minkowski order must be >= 1, got {self.order}")

    @classmethod
    def parse(cls, name: str) -> "DistanceMetric":
        """``"l1"``, ``"manhattan"``, ``"l2"``, ``"euclidean"`` or ``"minkowski:3"``."""
        key = name.lower()
        if key in ("l1", "manhattan", "taxicab"):
            return cls("manhattan")
        if key in ("l2", "euclidean"):
            return cls("euclidean")
        if key.startswith("minkowski"):
            _, _, order = key.partition(":")
            return cls("minkowski", float(order or 2))
        raise ValueError(f"unknown metric {name!r}")

    @property
    def label(self) -> str:
        if self.kind == "manhattan":
            return "L1"
        if self.kind == "euclidean":
            return "L2"
        return f"minkowski{self.order:g}"


MANHATTAN = DistanceMetric("manhattan")
EUCLIDEAN = DistanceMetric("euclidean")


def _reduce_diff(diff: np.ndarray, metric: DistanceMetric) -> np.ndarray:
    a = np.abs(diff)
    if metric.kind == "manhattan":
        return a.sum(axis=-1)
    if metric.kind == "euclidean":
        return np.sqrt((a * a).sum(axis=-1))
    return (a ** metric.order).sum(axis=-1) ** (1.0 / metric.order)


def distance(p, q, metric: DistanceMetric = MANHATTAN) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")
    return float(_reduce_diff(p - q, metric))


def pairwise_distances(queries, refs, metric: DistanceMetric = MANHATTAN,
                       chunk_bytes: int = 64 << 20) -> np.ndarray:
    """Exact distance matrix (n_queries, n_refs), computed in row chunks."""
    q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    r = np.atleast_2d(np.asarray(refs, dtype=np.float64))
    if q.shape[1] != r.shape[1]:
        raise ValueError(f"dimension mismatch: {q.shape[1]} vs {r.shape[1]}")
    out = np.empty((q.shape[0], r.shape[0]))
    step = max(1, chunk_bytes // (8 * r.size or 1))
    for i in range(0, q.shape[0], step):
        out[i:i + step] = _reduce_diff(q[i:i + step, None, :] - r[None, :, :], metric)
    return out


@dataclass
class KnnModel:
    references: np.ndarray  # (N, K)
    labels: np.ndarray  # (N,)

    def __post_init__(self):
        self.references = np.atleast_2d(np.asarray(self.references, dtype=np.float64))
        self.labels = np.asarray(self.labels, dtype=np.intp)
        if len(self.references) == 0:
            raise ValueError("KNN model needs at least one reference")
        if len(self.labels) != len(self.references):
            raise ValueError("references and labels are not aligned")
        if self.labels.min() < 0:
            raise ValueError("labels must be non-negative")


def vote_nearest(dists: np.ndarray, labels: np.ndarray, k: int) -> int:
    """Majority label among the ``k`` smallest ``dists``.

    A vote tie goes to the class whose closest member is nearest, then
    to the lower class index.
    """
    # stable sort: equal distances keep the lower reference index first
    order = np.argsort(dists, kind="stable")[:k]
    near_labels = labels[order]
    near_d = dists[order]
    classes, counts = np.unique(near_labels, return_counts=True)
    tied = classes[counts == counts.max()]
    if len(tied) == 1:
        return int(tied[0])
    best = min(tied, key=lambda c: (near_d[near_labels == c].min(), c))
    return int(best)


def knn_predict_many(model: KnnModel, queries, k: int,
                     metric: DistanceMetric = MANHATTAN) -> np.ndarray:
    n = len(model.references)
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    d = pairwise_distances(queries, model.references, metric)
    return np.array([vote_nearest(row, model.labels, k) for row in d], dtype=np.intp)


def knn_predict(model: KnnModel, query, k: int, metric: DistanceMetric = MANHATTAN) -> int:
    return int(knn_predict_many(model, np.asarray(query)[None, :], k, metric)[0])


def knn_evaluate(model: KnnModel, queries, labels, k: int,
                 metric: DistanceMetric = MANHATTAN) -> float:
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise ValueError("empty query set")
    if len(queries) != len(labels):
        raise ValueError("queries and labels are not aligned")
    return float(np.mean(knn_predict_many(model, queries, k, metric) == labels))
