"""Pointwise activations, softmax and the cross-entropy loss."""

from __future__ import annotations

import numpy as np

SOFTPLUS_LINEAR_ABOVE = 30.0


def sigmoid(x):
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softplus(x):
    x = np.asarray(x)
    safe = np.minimum(x, SOFTPLUS_LINEAR_ABOVE)
    return np.where(x > SOFTPLUS_LINEAR_ABOVE, x, np.log1p(np.exp(safe)))


def relu(x):
    return np.maximum(x, 0)


def relu_grad(x, g):
    return g * (x > 0)


def swish(x):
    return x * sigmoid(x)


def swish_grad(x, g):
    s = sigmoid(x)
    return g * (s + x * s * (1 - s))


def mish_parts(x):
    """``(mish(x), tanh(softplus(x)), sigmoid(x))`` from a single exp.

    With ``n = e^x``, ``tanh(log1p(n)) = n(n+2) / (n(n+2) + 2)``. Above 20
    the ratio is 1 to double precision, so the input is clamped there.
    """
    n = np.exp(np.minimum(x, 20.0))
    s = n / (1.0 + n)
    n *= n + 2.0
    t = n / (n + 2.0)
    return x * t, t, s


def mish(x):
    return mish_parts(np.asarray(x))[0]


def mish_grad(x, g):
    _, t, s = mish_parts(np.asarray(x))
    return g * (t + x * (1 - t * t) * s)


def softmax(x, axis=-1):
    z = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_grad(s, g, axis=-1):
    """Backward through softmax given its output ``s``."""
    return s * (g - (g * s).sum(axis=axis, keepdims=True))


def log_softmax(x, axis=-1):
    z = x - np.max(x, axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy of integer ``labels`` and its gradient w.r.t. ``logits``."""
    logits = np.asarray(logits)
    labels = np.asarray(labels, dtype=np.intp)
    n, c = logits.shape
    if labels.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise ValueError(f"labels must lie in [0, {c})")
    logp = log_softmax(logits)
    rows = np.arange(n)
    loss = -logp[rows, labels].mean()
    grad = np.exp(logp)
    grad[rows, labels] -= 1
    grad /= n
    return float(loss), grad


ACTIVATIONS = {
    "relu": (relu, relu_grad),
    "swish": (swish, swish_grad),
    "mish": (mish, mish_grad),
}
