"""Soft-margin kernel SVM solved in the dual with SMO, plus one-vs-all.

The binary solver minimises ``0.5 a'Qa - sum(a)`` subject to
``0 <= a <= C`` and ``sum(a * y) == 0`` with ``Q = yy' * K``. Each step
picks the maximal violating pair (first-order working set selection) and
solves the two-variable subproblem in closed form.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

KERNELS = ("linear", "rbf", "sigmoid", "chi2", "intersection")
CHI2_EPS = 1e-12
_TAU = 1e-12


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "linear"
    gamma: float | None = None  # None -> 1 / n_features at training time
    coef0: float = 0.0

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise ValueError(f"unknown kernel {self.kind!r}; expected one of {KERNELS}")
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    def resolved(self, n_features: int) -> "KernelSpec":
        if self.gamma is not None:
            return self
        return KernelSpec(self.kind, 1.0 / n_features, self.coef0)

    @classmethod
    def parse(cls, name: str, gamma=None, coef0=0.0) -> "KernelSpec":
        aliases = {"inter": "intersection", "chi-square": "chi2", "lin": "linear"}
        key = name.lower()
        return cls(aliases.get(key, key), gamma, coef0)


def _check_nonneg(*arrays):
    for a in arrays:
        if np.any(a < 0):
            raise ValueError("chi2 and intersection kernels need non-negative inputs")


def gram_matrix(spec: KernelSpec, X, Y=None, chunk_bytes: int = 64 << 20) -> np.ndarray:
    """Kernel matrix between the rows of ``X`` and ``Y``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = X if Y is None else np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    spec = spec.resolved(X.shape[1])
    kind = spec.kind
    if kind == "linear":
        return X @ Y.T
    if kind == "sigmoid":
        return np.tanh(spec.gamma * (X @ Y.T) + spec.coef0)
    if kind == "rbf":
        d = (X * X).sum(1)[:, None] - 2 * X @ Y.T + (Y * Y).sum(1)[None, :]
        return np.exp(-spec.gamma * np.maximum(d, 0.0))

    _check_nonneg(X, Y)
    out = np.empty((X.shape[0], Y.shape[0]))
    step = max(1, chunk_bytes // (8 * Y.size or 1))
    for i in range(0, X.shape[0], step):
        a = X[i:i + step, None, :]
        if kind == "intersection":
            out[i:i + step] = np.minimum(a, Y[None]).sum(-1)
        else:
            diff = a - Y[None]
            out[i:i + step] = (diff * diff / (a + Y[None] + CHI2_EPS)).sum(-1)
    if kind == "chi2":
        out = np.exp(-spec.gamma * out)
    return out


def kernel_eval(spec: KernelSpec, x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return float(gram_matrix(spec, x[None], y[None])[0, 0])


@dataclass
class BinarySvmModel:
    support_vectors: np.ndarray  # (M, K)
    dual_coef: np.ndarray  # alpha_i * y_i, (M,)
    bias: float
    kernel: KernelSpec
    C: float
    # solver diagnostics, not serialised
    alpha: np.ndarray | None = field(default=None, repr=False)
    labels: np.ndarray | None = field(default=None, repr=False)
    support_index: np.ndarray | None = field(default=None, repr=False)
    iterations: int = 0
    converged: bool = True
    dual_objective: float = float("nan")

    @property
    def w(self) -> np.ndarray:
        """Explicit primal weights; only meaningful for the linear kernel."""
        if self.kernel.kind != "linear":
            raise ValueError("explicit weights exist only for the linear kernel")
        return self.dual_coef @ self.support_vectors


def _smo(K: np.ndarray, y: np.ndarray, C: float, tol: float, max_iter: int):
    n = len(y)
    alpha = np.zeros(n)
    grad = -np.ones(n)
    diag = np.diag(K).copy()
    it = 0
    converged = False
    while it < max_iter:
        # -y * grad, restricted to the index sets that can still move
        score = -y * grad
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.argmax(np.where(up, score, -np.inf)))
        j = int(np.argmin(np.where(low, score, np.inf)))
        if score[i] - score[j] < tol:
            converged = True
            break
        it += 1
        quad = diag[i] + diag[j] - 2.0 * K[i, j]
        if quad <= 0:
            quad = _TAU
        room_i = C - alpha[i] if y[i] > 0 else alpha[i]
        room_j = alpha[j] if y[j] > 0 else C - alpha[j]
        t = min((score[i] - score[j]) / quad, room_i, room_j)
        # land exactly on the box edge so the variable leaves the active set
        alpha[i] = (C if y[i] > 0 else 0.0) if t == room_i else alpha[i] + y[i] * t
        alpha[j] = (0.0 if y[j] > 0 else C) if t == room_j else alpha[j] - y[j] * t
        grad += t * y * (K[:, i] - K[:, j])
    return alpha, grad, it, converged


def _bias(alpha, grad, y, C):
    score = -y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(score[free].mean())
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    hi = score[up].max() if up.any() else score[low].min()
    lo = score[low].min() if low.any() else score[up].max()
    return float((hi + lo) / 2)


def svm_train_binary(X, y, kernel: KernelSpec = KernelSpec(), C: float = 1.0,
                     tol: float = 1e-3, max_iter: int = 100_000,
                     gram: np.ndarray | None = None) -> BinarySvmModel:
    """Train a binary SVM; ``y`` holds -1 / +1 labels.

    ``gram`` may carry a precomputed kernel matrix for ``X``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    if C <= 0:
        raise ValueError(f"C must be positive, got {C}")
    if len(y) != len(X):
        raise ValueError("X and y are not aligned")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    if len(np.unique(y)) < 2:
        raise ValueError("both classes must be present")
    kernel = kernel.resolved(X.shape[1])
    K = gram_matrix(kernel, X) if gram is None else gram
    alpha, grad, it, converged = _smo(K, y, C, tol, max_iter)
    b = _bias(alpha, grad, y, C)
    sv = np.flatnonzero(alpha > 0)
    dual_obj = float(alpha.sum() - 0.5 * (alpha * y) @ K @ (alpha * y))
    return BinarySvmModel(
        support_vectors=X[sv], dual_coef=alpha[sv] * y[sv], bias=b, kernel=kernel, C=C,
        alpha=alpha, labels=y, support_index=sv, iterations=it, converged=converged,
        dual_objective=dual_obj,
    )


def svm_decision(model: BinarySvmModel, x) -> np.ndarray | float:
    """Signed decision value(s) for one vector or a batch of rows."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xb = np.atleast_2d(x)
    if xb.shape[1] != model.support_vectors.shape[1]:
        raise ValueError(f"dimension mismatch: {xb.shape[1]} vs {model.support_vectors.shape[1]}")
    if len(model.dual_coef) == 0:
        vals = np.full(len(xb), model.bias)
    else:
        vals = gram_matrix(model.kernel, xb, model.support_vectors) @ model.dual_coef + model.bias
    return float(vals[0]) if single else vals


@dataclass
class OvaSvmModel:
    models: list  # one BinarySvmModel per class index

    @property
    def n_classes(self) -> int:
        return len(self.models)


def ova_train(X, labels, kernel: KernelSpec = KernelSpec(), C: float = 1.0,
              n_classes: int | None = None, **kw) -> OvaSvmModel:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.intp)
    n_classes = int(labels.max()) + 1 if n_classes is None else n_classes
    present = np.unique(labels)
    if n_classes < 2:
        raise ValueError("one-vs-all needs at least two classes")
    missing = sorted(set(range(n_classes)) - set(present.tolist()))
    if missing:
        raise ValueError(f"classes absent from training data: {missing}")
    kernel = kernel.resolved(X.shape[1])
    K = gram_matrix(kernel, X)
    models = [
        svm_train_binary(X, np.where(labels == c, 1.0, -1.0), kernel, C, gram=K, **kw)
        for c in range(n_classes)
    ]
    return OvaSvmModel(models)


def ova_decision(model: OvaSvmModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return np.stack([svm_decision(m, X) for m in model.models], axis=1)


def ova_predict(model: OvaSvmModel, x):
    """Argmax of the per-class decision values (lowest class on ties)."""
    x = np.asarray(x, dtype=np.float64)
    pred = np.argmax(ova_decision(model, x), axis=1)
    return int(pred[0]) if x.ndim == 1 else pred


# -- serialisation ---------------------------------------------------------

_MAGIC = b"BSVM"
_OVA_MAGIC = b"OSVM"
_VERSION = 1


def _pack_binary(m: BinarySvmModel) -> bytes:
    M, dim = m.support_vectors.shape
    head = _MAGIC + struct.pack(
        "<IIddddII", _VERSION, KERNELS.index(m.kernel.kind), m.kernel.gamma or 0.0,
        m.kernel.coef0, m.C, m.bias, M, dim,
    )
    return (head + np.asarray(m.support_vectors, "<f4").tobytes()
            + np.asarray(m.dual_coef, "<f4").tobytes())


def _unpack_binary(raw: bytes, offset: int = 0):
    if raw[offset:offset + 4] != _MAGIC:
        raise ValueError("not a binary SVM model block")
    fmt = "<IIddddII"
    version, kid, gamma, coef0, C, bias, M, dim = struct.unpack_from(fmt, raw, offset + 4)
    if version != _VERSION:
        raise ValueError(f"unsupported SVM model version {version}")
    pos = offset + 4 + struct.calcsize(fmt)
    sv = np.frombuffer(raw, "<f4", M * dim, pos).reshape(M, dim).astype(np.float64)
    pos += 4 * M * dim
    coef = np.frombuffer(raw, "<f4", M, pos).astype(np.float64)
    pos += 4 * M
    kernel = KernelSpec(KERNELS[kid], gamma if gamma > 0 else None, coef0)
    return BinarySvmModel(sv, coef, bias, kernel, C), pos


def save_svm(model, path) -> None:
    if isinstance(model, OvaSvmModel):
        blob = _OVA_MAGIC + struct.pack("<II", _VERSION, model.n_classes)
        blob += b"".join(_pack_binary(m) for m in model.models)
    else:
        blob = _pack_binary(model)
    Path(path).write_bytes(blob)


def load_svm(path):
    raw = Path(path).read_bytes()
    if raw[:4] == _OVA_MAGIC:
        _, n = struct.unpack_from("<II", raw, 4)
        pos, models = 12, []
        for _ in range(n):
            m, pos = _unpack_binary(raw, pos)
            models.append(m)
        return OvaSvmModel(models)
    return _unpack_binary(raw)[0]
