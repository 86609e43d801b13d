"""Shape-checked array helpers and seeded random streams.

Arrays are plain ``numpy.ndarray`` objects. Image batches use the
``(batch, height, width, channel)`` layout throughout the package.
"""

from __future__ import annotations

import numpy as np

WIDE = np.float64
STANDARD = np.float32

_ELEMENTWISE = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
    "div": np.divide,
    "max": np.maximum,
    "min": np.minimum,
}


class ShapeError(ValueError):
    """Raised when array shapes do not line up."""


def as_tensor(data, precision=WIDE) -> np.ndarray:
    """Return a C-contiguous array with the requested precision."""
    return np.ascontiguousarray(data, dtype=precision)


def elementwise(kind: str, a, b) -> np.ndarray:
    """Apply ``kind`` pointwise. ``b`` must match ``a``'s shape or be a scalar."""
    try:
        fn = _ELEMENTWISE[kind]
    except KeyError:
        raise ValueError(f"unknown elementwise op {kind!r}") from None
    a = np.asarray(a)
    if np.ndim(b) == 0:
        return fn(a, b)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    return fn(a, b)


def matmul(a, b) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs rank-2 operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner dimensions differ: {a.shape} x {b.shape}")
    return a @ b


def reduce(kind: str, a, axis: int | None = None) -> np.ndarray:
    """Reduce along ``axis`` (all axes for ``None``).

    ``argmax`` returns the lowest index among ties, which is what
    ``np.argmax`` already does.
    """
    a = np.asarray(a)
    if axis is not None:
        if not -a.ndim <= axis < a.ndim:
            raise ShapeError(f"axis {axis} out of range for rank {a.ndim}")
        if a.shape[axis] == 0:
            raise ShapeError("cannot reduce over an empty axis")
    elif a.size == 0:
        raise ShapeError("cannot reduce an empty array")
    if kind == "sum":
        return np.sum(a, axis=axis)
    if kind == "mean":
        return np.mean(a, axis=axis)
    if kind == "max":
        return np.max(a, axis=axis)
    if kind == "argmax":
        return np.argmax(a, axis=axis)
    raise ValueError(f"unknown reduction {kind!r}")


class SeededRng:
    """Deterministic random stream identified by ``(seed, stream_id)``.

    Streams with different ids are statistically independent, so each
    consumer (augmentation, dropout, k-means seeding, ...) can derive its
    own generator from one root seed.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        if seed < 0 or stream_id < 0:
            raise ValueError("seed and stream_id must be non-negative")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def child(self, stream_id: int) -> "SeededRng":
        """Derive a sibling stream from the same root seed."""
        return SeededRng(self.seed, stream_id)

    def __repr__(self):
        return f"SeededRng(seed={self.seed}, stream_id={self.stream_id})"

    # thin pass-throughs used across the package
    def random(self, size=None):
        return self.generator.random(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.generator.normal(loc, scale, size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)

    def permutation(self, x):
        return self.generator.permutation(x)

    def choice(self, a, size=None, replace=True, p=None):
        return self.generator.choice(a, size=size, replace=replace, p=p)
