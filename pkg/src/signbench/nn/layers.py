"""Layers with explicit forward and backward passes.

Image tensors are ``(N, H, W, C)``. Every layer caches what its backward
pass needs during ``forward``; ``backward`` fills ``self.grads`` (same keys
as ``self.params``) and returns the gradient w.r.t. the layer input.
"""

from __future__ import annotations

import numpy as np

from . import functional as F


class Layer:
    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def forward(self, x, training=False):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    def state(self) -> dict[str, np.ndarray]:
        """Everything needed to restore the layer: params plus buffers."""
        return {k: v.copy() for k, v in self.params.items()}

    def load_state(self, state):
        for k, v in state.items():
            if k not in self.params:
                raise KeyError(f"{type(self).__name__} has no entry {k!r}")
            if self.params[k].shape != v.shape:
                raise ValueError(f"{k}: shape {v.shape} != {self.params[k].shape}")
            self.params[k][...] = v

    def __repr__(self):
        shapes = {k: v.shape for k, v in self.params.items()}
        return f"{type(self).__name__}({shapes})"


def _same_padding(size, k, stride):
    out = -(-size // stride)
    total = max((out - 1) * stride + k - size, 0)
    return total // 2, total - total // 2


def conv_output_size(size, k, stride, padding):
    if padding == "same":
        return -(-size // stride)
    pad = 0 if padding == "valid" else 2 * int(padding)
    return (size + pad - k) // stride + 1


class Conv2D(Layer):
    """2-D cross-correlation via im2col. Weights are ``(kh, kw, Cin, Cout)``."""

    def __init__(self, in_channels, filters, kernel_size=3, stride=1, padding="same",
                 rng=None, dtype=np.float32):
        super().__init__()
        k = kernel_size
        self.kernel_size, self.stride, self.padding = k, stride, padding
        self.input_grad = True
        fan_in = k * k * in_channels
        w = (rng.normal(0.0, np.sqrt(2.0 / fan_in), (k, k, in_channels, filters))
             if rng is not None else np.zeros((k, k, in_channels, filters)))
        self.params = {"W": w.astype(dtype), "b": np.zeros(filters, dtype)}

    def _pads(self, h, w):
        k, s, p = self.kernel_size, self.stride, self.padding
        if p == "same":
            return _same_padding(h, k, s), _same_padding(w, k, s)
        if p == "valid":
            return (0, 0), (0, 0)
        return (int(p), int(p)), (int(p), int(p))

    def forward(self, x, training=False):
        W = self.params["W"]
        if x.ndim != 4 or x.shape[3] != W.shape[2]:
            raise ValueError(f"conv input {x.shape} does not match weights {W.shape}")
        k, s = self.kernel_size, self.stride
        n, h, w, c = x.shape
        ph, pw = self._pads(h, w)
        xp = np.pad(x, ((0, 0), ph, pw, (0, 0))) if any(ph + pw) else x
        hp, wp = xp.shape[1:3]
        if hp < k or wp < k:
            raise ValueError(f"kernel {k} does not fit padded input {hp}x{wp}")
        ho, wo = (hp - k) // s + 1, (wp - k) // s + 1
        cols = np.empty((n, ho, wo, k, k, c), dtype=x.dtype)
        for i in range(k):
            for j in range(k):
                cols[:, :, :, i, j, :] = xp[:, i:i + s * (ho - 1) + 1:s, j:j + s * (wo - 1) + 1:s, :]
        cols = cols.reshape(n * ho * wo, k * k * c)
        self._cache = (cols, xp.shape, ph, pw, (ho, wo))
        out = cols @ W.reshape(-1, W.shape[3]) + self.params["b"]
        return out.reshape(n, ho, wo, W.shape[3])

    def backward(self, grad):
        cols, xshape, ph, pw, (ho, wo) = self._cache
        W = self.params["W"]
        k, s = self.kernel_size, self.stride
        n, hp, wp, c = xshape
        g2 = grad.reshape(-1, W.shape[3])
        self.grads = {
            "W": (cols.T @ g2).reshape(W.shape),
            "b": g2.sum(axis=0),
        }
        if not self.input_grad:
            return None
        dcols = (g2 @ W.reshape(-1, W.shape[3]).T).reshape(n, ho, wo, k, k, c)
        dxp = np.zeros(xshape, dtype=grad.dtype)
        for i in range(k):
            for j in range(k):
                dxp[:, i:i + s * (ho - 1) + 1:s, j:j + s * (wo - 1) + 1:s, :] += dcols[:, :, :, i, j, :]
        return dxp[:, ph[0]:hp - ph[1], pw[0]:wp - pw[1], :]


class Dense(Layer):
    def __init__(self, in_features, units, rng=None, dtype=np.float32):
        super().__init__()
        w = (rng.normal(0.0, np.sqrt(2.0 / in_features), (in_features, units))
             if rng is not None else np.zeros((in_features, units)))
        self.params = {"W": w.astype(dtype), "b": np.zeros(units, dtype)}

    def forward(self, x, training=False):
        W = self.params["W"]
        if x.ndim != 2 or x.shape[1] != W.shape[0]:
            raise ValueError(f"dense input {x.shape} does not match weights {W.shape}")
        self._x = x
        return x @ W + self.params["b"]

    def backward(self, grad):
        self.grads = {"W": self._x.T @ grad, "b": grad.sum(axis=0)}
        return grad @ self.params["W"].T


class BatchNorm(Layer):
    """Per-channel batch normalisation over every axis but the last."""

    def __init__(self, channels, eps=1e-5, momentum=0.9, dtype=np.float32):
        super().__init__()
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.eps, self.momentum = eps, momentum
        self.params = {"gamma": np.ones(channels, dtype), "beta": np.zeros(channels, dtype)}
        self.running_mean = np.zeros(channels, dtype)
        self.running_var = np.ones(channels, dtype)

    def forward(self, x, training=False):
        gamma, beta = self.params["gamma"], self.params["beta"]
        if not training:
            scale = gamma / np.sqrt(self.running_var + self.eps)
            return x * scale + (beta - self.running_mean * scale)
        if x.shape[0] < 2:
            raise ValueError("batch norm in training mode needs a batch of at least 2")
        c = x.shape[-1]
        x2 = x.reshape(-1, c)
        m = x2.shape[0]
        ones = np.ones(m, dtype=x.dtype)
        # column sums through BLAS are far faster than ufunc reductions
        mu = (ones @ x2) / m
        xhat = x2 - mu
        var = (ones @ (xhat * xhat)) / m
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat *= inv_std
        mom = self.momentum
        self.running_mean = (mom * self.running_mean + (1 - mom) * mu).astype(self.running_mean.dtype)
        self.running_var = (mom * self.running_var + (1 - mom) * var).astype(self.running_var.dtype)
        self._cache = (xhat, inv_std, ones)
        return (xhat * gamma + beta).reshape(x.shape)

    def backward(self, grad):
        xhat, inv_std, ones = self._cache
        g2 = grad.reshape(xhat.shape)
        m = g2.shape[0]
        dbeta = ones @ g2
        dgamma = ones @ (g2 * xhat)
        self.grads = {"gamma": dgamma, "beta": dbeta}
        dx = xhat * dgamma
        dx += dbeta
        dx *= -1.0
        dx += m * g2
        dx *= self.params["gamma"] * inv_std / m
        return dx.reshape(grad.shape)

    def state(self):
        st = super().state()
        st["running_mean"] = self.running_mean.copy()
        st["running_var"] = self.running_var.copy()
        return st

    def load_state(self, state):
        state = dict(state)
        rm = state.pop("running_mean", None)
        rv = state.pop("running_var", None)
        super().load_state(state)
        if rm is not None:
            self.running_mean = np.array(rm, dtype=self.running_mean.dtype)
        if rv is not None:
            self.running_var = np.array(rv, dtype=self.running_var.dtype)


class MaxPool2D(Layer):
    """Max pooling; the gradient goes to the first maximum of each window."""

    def __init__(self, size=2, stride=2):
        super().__init__()
        self.size, self.stride = size, stride

    def forward(self, x, training=False):
        n, h, w, c = x.shape
        k, s = self.size, self.stride
        if k > h or k > w:
            raise ValueError(f"pool window {k} larger than input {h}x{w}")
        ho, wo = (h - k) // s + 1, (w - k) // s + 1

        def window(i, j):
            return x[:, i:i + s * (ho - 1) + 1:s, j:j + s * (wo - 1) + 1:s, :]

        out = window(0, 0).copy()
        for idx in range(1, k * k):
            np.maximum(out, window(*divmod(idx, k)), out=out)
        # walk windows backwards so the lowest index wins ties
        arg = np.zeros(out.shape, dtype=np.int16)
        for idx in range(k * k - 1, -1, -1):
            arg[window(*divmod(idx, k)) == out] = idx
        self._cache = (arg, x.shape, ho, wo)
        return out

    def backward(self, grad):
        arg, shape, ho, wo = self._cache
        k, s = self.size, self.stride
        dx = np.zeros(shape, dtype=grad.dtype)
        for i in range(k):
            for j in range(k):
                dx[:, i:i + s * (ho - 1) + 1:s, j:j + s * (wo - 1) + 1:s, :] += grad * (arg == i * k + j)
        return dx


class Flatten(Layer):
    def forward(self, x, training=False):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._shape)


class Activation(Layer):
    def __init__(self, kind):
        super().__init__()
        if kind not in F.ACTIVATIONS and kind != "softmax":
            raise ValueError(f"unknown activation {kind!r}")
        self.kind = kind

    def forward(self, x, training=False):
        if self.kind == "softmax":
            self._out = F.softmax(x)
            return self._out
        self._x = x
        if self.kind == "mish":
            out, self._t, self._s = F.mish_parts(x)
            return out
        return F.ACTIVATIONS[self.kind][0](x)

    def backward(self, grad):
        if self.kind == "softmax":
            return F.softmax_grad(self._out, grad)
        if self.kind == "mish":
            t, s = self._t, self._s
            d = 1.0 - t * t
            d *= self._x
            d *= s
            d += t
            d *= grad
            return d
        return F.ACTIVATIONS[self.kind][1](self._x, grad)

    def __repr__(self):
        return f"Activation({self.kind!r})"


class Dropout(Layer):
    """Inverted dropout: keep with probability ``keep_prob``, rescale by ``1/keep_prob``.

    With ``freeze_mask`` set, the first mask drawn is reused on later
    calls of the same shape (used for finite-difference checks).
    """

    def __init__(self, keep_prob=0.5, rng=None):
        super().__init__()
        if not 0 < keep_prob <= 1:
            raise ValueError(f"keep_prob must be in (0, 1], got {keep_prob}")
        self.keep_prob = keep_prob
        self.rng = rng
        self.freeze_mask = False
        self.mask = None

    def forward(self, x, training=False):
        if not training or self.keep_prob == 1:
            self.mask = None if not self.freeze_mask else self.mask
            self._active = False
            return x
        self._active = True
        if not (self.freeze_mask and self.mask is not None and self.mask.shape == x.shape):
            if self.rng is None:
                raise ValueError("dropout in training mode needs a random stream")
            keep = self.rng.random(x.shape) < self.keep_prob
            self.mask = keep.astype(x.dtype) / np.asarray(self.keep_prob, dtype=x.dtype)
        return x * self.mask

    def backward(self, grad):
        return grad * self.mask if self._active else grad

    def __repr__(self):
        return f"Dropout({self.keep_prob})"
