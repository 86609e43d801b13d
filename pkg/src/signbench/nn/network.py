"""Declarative network specs and the sequential network built from them."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..numeric import SeededRng
from . import functional as F
from .layers import Activation, BatchNorm, Conv2D, Dense, Dropout, Flatten, MaxPool2D, conv_output_size


@dataclass(frozen=True)
class LayerSpec:
    """One layer of a sequential network.

    ``kind`` is one of conv2d, batchnorm, maxpool, dense, dropout,
    activation or flatten; only the fields relevant to that kind are read.
    """

    kind: str
    filters: int = 0
    kernel_size: int = 3
    stride: int = 1
    padding: str | int = "same"
    units: int = 0
    size: int = 2
    eps: float = 1e-5
    momentum: float = 0.9
    keep_prob: float = 0.5
    activation: str = ""

    def __post_init__(self):
        k = self.kind
        bad = (
            (k == "conv2d" and (self.filters <= 0 or self.kernel_size <= 0 or self.stride <= 0))
            or (k == "dense" and self.units <= 0)
            or (k == "maxpool" and (self.size <= 0 or self.stride <= 0))
            or (k == "batchnorm" and self.eps <= 0)
            or (k == "dropout" and not 0 < self.keep_prob <= 1)
            or (k == "activation" and self.activation not in ("relu", "swish", "mish", "softmax"))
        )
        if k not in ("conv2d", "batchnorm", "maxpool", "dense", "dropout", "activation", "flatten"):
            raise ValueError(f"unknown layer kind {k!r}")
        if bad:
            raise ValueError(f"invalid parameters for {self}")


def conv(filters, kernel_size=3, stride=1, padding="same"):
    return LayerSpec("conv2d", filters=filters, kernel_size=kernel_size, stride=stride, padding=padding)


def batchnorm(eps=1e-5, momentum=0.9):
    return LayerSpec("batchnorm", eps=eps, momentum=momentum)


def maxpool(size=2, stride=2):
    return LayerSpec("maxpool", size=size, stride=stride)


def dense(units):
    return LayerSpec("dense", units=units)


def dropout(keep_prob=0.5):
    return LayerSpec("dropout", keep_prob=keep_prob)


def activation(kind):
    return LayerSpec("activation", activation=kind)


def flatten():
    return LayerSpec("flatten")


@dataclass
class NetworkSpec:
    input_shape: tuple  # (H, W, C)
    layers: list = field(default_factory=list)
    class_count: int = 2

    def shapes(self) -> list[tuple]:
        """Output shape (without batch axis) after every layer; validates the chain."""
        shape = tuple(self.input_shape)
        out = []
        for spec in self.layers:
            k = spec.kind
            if k == "conv2d":
                if len(shape) != 3:
                    raise ValueError(f"conv2d needs an image input, got {shape}")
                h = conv_output_size(shape[0], spec.kernel_size, spec.stride, spec.padding)
                w = conv_output_size(shape[1], spec.kernel_size, spec.stride, spec.padding)
                if h <= 0 or w <= 0:
                    raise ValueError(f"conv kernel does not fit {shape}")
                shape = (h, w, spec.filters)
            elif k == "maxpool":
                if len(shape) != 3 or spec.size > min(shape[:2]):
                    raise ValueError(f"pool window {spec.size} does not fit {shape}")
                shape = ((shape[0] - spec.size) // spec.stride + 1,
                         (shape[1] - spec.size) // spec.stride + 1, shape[2])
            elif k == "flatten":
                shape = (int(np.prod(shape)),)
            elif k == "dense":
                if len(shape) != 1:
                    raise ValueError(f"dense needs a flat input, got {shape}")
                shape = (spec.units,)
            out.append(shape)
        if not out or out[-1] != (self.class_count,):
            raise ValueError(f"network output {out[-1] if out else None} != ({self.class_count},)")
        if self.layers[-1].kind != "activation" or self.layers[-1].activation != "softmax":
            raise ValueError("network must end in a softmax")
        return out


def build_proposed_network(class_count: int, input_shape=(128, 128, 3), act: str = "mish",
                           keep_prob: float = 0.5, eps: float = 1e-5,
                           momentum: float = 0.9) -> NetworkSpec:
    """Three conv stages (16 / 32,32 / 64,64 filters) and a four-layer classifier."""
    if class_count < 2:
        raise ValueError("need at least two classes")
    bn = batchnorm(eps, momentum)
    a = activation(act)
    layers = [conv(16), bn, a, maxpool()]
    for f in (32, 64):
        layers += [conv(f), bn, a, conv(f), bn, a, maxpool()]
    layers.append(flatten())
    for units in (512, 256, 128):
        layers += [dense(units), bn, a, dropout(keep_prob)]
    layers += [dense(class_count), activation("softmax")]
    return NetworkSpec(tuple(input_shape), layers, class_count)


# stream ids for the generators a network derives from its root seed
INIT_STREAM = 101
DROPOUT_STREAM = 102


class Network:
    """A sequential stack of layers built from a :class:`NetworkSpec`.

    ``forward`` returns logits; the terminal softmax is folded into the
    loss during training and applied explicitly by :meth:`predict_proba`.
    """

    def __init__(self, spec: NetworkSpec, seed: int = 0, dtype=np.float32):
        shapes = spec.shapes()
        self.spec = spec
        self.dtype = dtype
        init_rng = SeededRng(seed, INIT_STREAM)
        drop_rng = SeededRng(seed, DROPOUT_STREAM)
        self.layers = []
        prev = tuple(spec.input_shape)
        for ls, shape in zip(spec.layers, shapes):
            k = ls.kind
            if k == "conv2d":
                layer = Conv2D(prev[2], ls.filters, ls.kernel_size, ls.stride, ls.padding, init_rng, dtype)
            elif k == "dense":
                layer = Dense(prev[0], ls.units, init_rng, dtype)
            elif k == "batchnorm":
                layer = BatchNorm(prev[-1], ls.eps, ls.momentum, dtype)
            elif k == "maxpool":
                layer = MaxPool2D(ls.size, ls.stride)
            elif k == "dropout":
                layer = Dropout(ls.keep_prob, drop_rng)
            elif k == "activation":
                layer = Activation(ls.activation)
            else:
                layer = Flatten()
            self.layers.append(layer)
            prev = shape
        self._body = self.layers[:-1]  # everything but the final softmax

    def forward(self, x, training=False):
        x = np.asarray(x, dtype=self.dtype)
        if x.shape[1:] != tuple(self.spec.input_shape):
            raise ValueError(f"input shape {x.shape[1:]} != {tuple(self.spec.input_shape)}")
        for layer in self._body:
            x = layer.forward(x, training)
        return x

    def backward(self, grad, input_grad=True):
        """Backpropagate ``grad`` (w.r.t. logits); returns the input gradient.

        With ``input_grad=False`` a leading convolution skips computing
        it, which saves time during training.
        """
        first = self._body[0]
        if isinstance(first, Conv2D):
            first.input_grad = input_grad
        for layer in reversed(self._body):
            grad = layer.backward(grad)
        return grad

    def loss_and_grads(self, x, labels, training=True):
        logits = self.forward(x, training)
        loss, g = F.softmax_cross_entropy(logits, labels)
        self.backward(g.astype(self.dtype), input_grad=False)
        return loss, logits

    def parameters(self):
        """``(key, param, grad)`` triples; keys are ``"<layer>.<name>"``."""
        for i, layer in enumerate(self.layers):
            for name, p in layer.params.items():
                yield f"{i}.{name}", p, layer.grads.get(name)

    def predict_proba(self, x, batch_size=64):
        x = np.asarray(x)
        out = [F.softmax(self.forward(x[i:i + batch_size], training=False))
               for i in range(0, len(x), batch_size)]
        return np.concatenate(out) if out else np.zeros((0, self.spec.class_count))

    def state(self) -> list[dict]:
        return [layer.state() for layer in self.layers]

    def load_state(self, state):
        if len(state) != len(self.layers):
            raise ValueError(f"state has {len(state)} layers, network has {len(self.layers)}")
        for layer, st in zip(self.layers, state):
            layer.load_state(st)

    def param_count(self) -> int:
        return sum(p.size for _, p, _ in self.parameters())
