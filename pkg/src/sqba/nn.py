"""Small feed-forward classifiers with input gradients.

Networks are used both as black-box targets (through :mod:`sqba.oracle`) and as
white-box surrogates. All arithmetic runs in float64; parameters are kept at
float32 precision so that a saved model reproduces its logits bit-for-bit.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import InputError


def _f32(a):
    return np.asarray(a, dtype=np.float32).astype(np.float64)


class Dense:
    kind = "dense"

    def __init__(self, n_in: int, n_out: int, weight=None, bias=None):
        self.n_in, self.n_out = n_in, n_out
        self.weight = _f32(weight) if weight is not None else np.zeros((n_out, n_in))
        self.bias = _f32(bias) if bias is not None else np.zeros(n_out)

    def init(self, rng):
        self.weight = _f32(rng.normal(0.0, np.sqrt(2.0 / self.n_in), (self.n_out, self.n_in)))
        self.bias = np.zeros(self.n_out)

    @property
    def params(self):
        return [self.weight, self.bias]

    def set_params(self, params):
        self.weight, self.bias = (_f32(p) for p in params)

    def output_shape(self, shape):
        if tuple(shape) != (self.n_in,):
            raise InputError(f"dense layer expects ({self.n_in},), got {tuple(shape)}")
        return (self.n_out,)

    def forward(self, x):
        return x @ self.weight.T + self.bias, x

    def backward(self, cache, g):
        return g @ self.weight, [g.T @ cache, g.sum(axis=0)]

    def describe(self):
        return {"type": self.kind, "in": self.n_in, "out": self.n_out}


class Conv2D:
    kind = "conv"

    def __init__(self, c_in: int, c_out: int, kernel: int = 3, pad: int = 1, weight=None, bias=None):
        self.c_in, self.c_out, self.kernel, self.pad = c_in, c_out, kernel, pad
        shape = (c_out, c_in, kernel, kernel)
        self.weight = _f32(weight) if weight is not None else np.zeros(shape)
        self.bias = _f32(bias) if bias is not None else np.zeros(c_out)

    def init(self, rng):
        fan_in = self.c_in * self.kernel**2
        shape = (self.c_out, self.c_in, self.kernel, self.kernel)
        self.weight = _f32(rng.normal(0.0, np.sqrt(2.0 / fan_in), shape))
        self.bias = np.zeros(self.c_out)

    @property
    def params(self):
        return [self.weight, self.bias]

    def set_params(self, params):
        self.weight, self.bias = (_f32(p) for p in params)

    def output_shape(self, shape):
        if len(shape) != 3 or shape[0] != self.c_in:
            raise InputError(f"conv layer expects {self.c_in} input channels, got shape {tuple(shape)}")
        h = shape[1] + 2 * self.pad - self.kernel + 1
        w = shape[2] + 2 * self.pad - self.kernel + 1
        if h < 1 or w < 1:
            raise InputError(f"conv kernel {self.kernel} too large for input {tuple(shape)}")
        return (self.c_out, h, w)

    def forward(self, x):
        p = self.pad
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
        xp = np.ascontiguousarray(xp)
        return kernels.conv_forward(xp, self.weight, self.bias), xp

    def backward(self, cache, g):
        xp = cache
        g = np.ascontiguousarray(g)
        dxp = kernels.conv_backward_input(g, self.weight, xp.shape[2], xp.shape[3])
        dw = kernels.conv_backward_weight(xp, g, self.kernel)
        p = self.pad
        dx = dxp[:, :, p : xp.shape[2] - p, p : xp.shape[3] - p] if p else dxp
        return dx, [dw, g.sum(axis=(0, 2, 3))]

    def describe(self):
        return {"type": self.kind, "in": self.c_in, "out": self.c_out, "kernel": self.kernel, "pad": self.pad}


class ReLU:
    kind = "relu"
    params: list = []

    def output_shape(self, shape):
        return tuple(shape)

    def forward(self, x):
        mask = x > 0
        return x * mask, mask

    def backward(self, cache, g):
        return g * cache, []

    def describe(self):
        return {"type": self.kind}


class MaxPool2D:
    kind = "maxpool"
    params: list = []

    def __init__(self, size: int = 2):
        self.size = size

    def output_shape(self, shape):
        if len(shape) != 3 or shape[1] < self.size or shape[2] < self.size:
            raise InputError(f"maxpool({self.size}) cannot take shape {tuple(shape)}")
        return (shape[0], shape[1] // self.size, shape[2] // self.size)

    def forward(self, x):
        out, arg = kernels.maxpool_forward(np.ascontiguousarray(x), self.size)
        return out, (arg, x.shape[2], x.shape[3])

    def backward(self, cache, g):
        arg, h, w = cache
        return kernels.maxpool_backward(np.ascontiguousarray(g), arg, self.size, h, w), []

    def describe(self):
        return {"type": self.kind, "size": self.size}


class Flatten:
    kind = "flatten"
    params: list = []

    def output_shape(self, shape):
        return (int(np.prod(shape)),)

    def forward(self, x):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, cache, g):
        return g.reshape(cache), []

    def describe(self):
        return {"type": self.kind}


LAYER_TYPES = {cls.kind: cls for cls in (Dense, Conv2D, ReLU, MaxPool2D, Flatten)}


def layer_from_description(desc: dict):
    kind = desc["type"]
    if kind == "dense":
        return Dense(desc["in"], desc["out"])
    if kind == "conv":
        return Conv2D(desc["in"], desc["out"], desc["kernel"], desc["pad"])
    if kind == "maxpool":
        return MaxPool2D(desc["size"])
    if kind in LAYER_TYPES:
        return LAYER_TYPES[kind]()
    raise InputError(f"unknown layer type {kind!r}")


def softmax(z):
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class Network:
    """A layered classifier over images of shape ``input_shape`` (C, H, W).

    ``data_range`` is the valid pixel interval; attacks clamp to it.
    """

    layers: list
    input_shape: tuple
    num_classes: int
    data_range: tuple = (0.0, 1.0)
    name: str = "net"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.input_shape = tuple(int(s) for s in self.input_shape)
        self.data_range = (float(self.data_range[0]), float(self.data_range[1]))
        if self.num_classes < 2:
            raise InputError("a classifier needs at least two classes")
        shape = self.input_shape
        for layer in self.layers:
            shape = layer.output_shape(shape)
        if shape != (self.num_classes,):
            raise InputError(f"network output shape {shape} does not match {self.num_classes} classes")

    # parameters -----------------------------------------------------------
    def init(self, seed: int = 0) -> "Network":
        rng = np.random.default_rng(seed)
        for layer in self.layers:
            if layer.params:
                layer.init(rng)
        return self

    def get_params(self) -> list:
        return [p.copy() for layer in self.layers for p in layer.params]

    def set_params(self, params) -> None:
        params = list(params)
        current = [p for layer in self.layers for p in layer.params]
        if len(params) != len(current):
            raise InputError(f"expected {len(current)} parameter arrays, got {len(params)}")
        for new, old in zip(params, current):
            if np.shape(new) != old.shape:
                raise InputError(f"parameter shape {np.shape(new)} does not match {old.shape}")
        for layer in self.layers:
            n = len(layer.params)
            if n:
                layer.set_params(params[:n])
                params = params[n:]

    def describe(self) -> list:
        return [layer.describe() for layer in self.layers]

    # evaluation -----------------------------------------------------------
    def _as_batch(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape == self.input_shape:
            return x[None], True
        if x.ndim == len(self.input_shape) + 1 and x.shape[1:] == self.input_shape:
            return x, False
        if x.ndim == 1 and x.size == int(np.prod(self.input_shape)):
            return x.reshape((1,) + self.input_shape), True
        raise InputError(f"input shape {x.shape} does not match network input {self.input_shape}")

    def _run(self, xb):
        caches = []
        h = xb
        for layer in self.layers:
            h, cache = layer.forward(h)
            caches.append(cache)
        return h, caches

    def _backprop(self, caches, g):
        param_grads = []
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            g, pg = layer.backward(cache, g)
            param_grads = pg + param_grads
        return g, param_grads

    def forward(self, x):
        """Logits for one image (shape ``(k,)``) or a batch (shape ``(n, k)``)."""
        xb, single = self._as_batch(x)
        if not np.all(np.isfinite(xb)):
            raise InputError("input contains non-finite values")
        logits, _ = self._run(xb)
        return logits[0] if single else logits

    def probabilities(self, x):
        return softmax(self.forward(x))

    def predict(self, x):
        """Arg-max class; ties resolve to the lowest index."""
        logits = self.forward(x)
        return int(np.argmax(logits)) if logits.ndim == 1 else np.argmax(logits, axis=1)

    def _class_grad(self, x, classes, mode):
        xb, single = self._as_batch(x)
        classes = np.broadcast_to(np.asarray(classes, dtype=np.int64), (xb.shape[0],))
        if np.any(classes < 0) or np.any(classes >= self.num_classes):
            raise InputError(f"class index out of range [0, {self.num_classes})")
        logits, caches = self._run(xb)
        rows = np.arange(xb.shape[0])
        if mode == "loss":
            g = softmax(logits)
            g[rows, classes] -= 1.0
        elif mode == "prob":
            p = softmax(logits)
            pc = p[rows, classes][:, None]
            g = -pc * p
            g[rows, classes] += pc[:, 0]
        else:
            g = np.zeros_like(logits)
            g[rows, classes] = 1.0
        gx, _ = self._backprop(caches, g)
        return gx[0].reshape(np.shape(x)) if single else gx

    def loss_grad_input(self, x, c):
        """Gradient of cross-entropy(softmax(logits), c) with respect to the input."""
        return self._class_grad(x, c, "loss")

    def logit_grad_input(self, x, c):
        """Gradient of logit ``c`` with respect to the input."""
        return self._class_grad(x, c, "logit")

    def prob_grad_input(self, x, c):
        """Gradient of softmax probability ``c`` with respect to the input."""
        return self._class_grad(x, c, "prob")

    def loss_and_param_grads(self, xb, yb):
        """Mean cross-entropy over a batch and its parameter gradients."""
        logits, caches = self._run(xb)
        p = softmax(logits)
        rows = np.arange(len(yb))
        loss = -np.mean(np.log(np.clip(p[rows, yb], 1e-300, None)))
        g = p
        g[rows, yb] -= 1.0
        _, param_grads = self._backprop(caches, g / len(yb))
        return loss, param_grads

    def accuracy(self, images, labels, batch: int = 512) -> float:
        if len(labels) == 0:
            return 0.0
        pred = np.concatenate([self.predict(images[i : i + batch]) for i in range(0, len(labels), batch)])
        return float(np.mean(pred == labels))


def mlp(input_shape, num_classes: int, hidden=(64,), seed: int = 0, data_range=(0.0, 1.0)) -> Network:
    layers: list = [Flatten()]
    width = int(np.prod(input_shape))
    for h in hidden:
        layers += [Dense(width, h), ReLU()]
        width = h
    layers.append(Dense(width, num_classes))
    return Network(layers, input_shape, num_classes, data_range, name="mlp").init(seed)


def small_cnn(input_shape, num_classes: int, channels=(8, 16), kernel: int = 3, seed: int = 0,
              data_range=(0.0, 1.0)) -> Network:
    """Stacks of conv(kernel, same padding) -> ReLU -> 2x2 max-pool, then one dense layer."""
    layers: list = []
    shape = tuple(input_shape)
    c = shape[0]
    for ch in channels:
        layers += [Conv2D(c, ch, kernel, kernel // 2), ReLU(), MaxPool2D(2)]
        c = ch
        shape = (ch, shape[1] // 2, shape[2] // 2)
    width = int(np.prod(shape))
    layers += [Flatten(), Dense(width, num_classes)]
    return Network(layers, input_shape, num_classes, data_range, name="cnn").init(seed)


def linear(input_shape, num_classes: int, weight=None, bias=None, data_range=(0.0, 1.0)) -> Network:
    """Single affine layer; handy for closed-form checks."""
    n = int(np.prod(input_shape))
    dense = Dense(n, num_classes, weight, bias)
    return Network([Flatten(), dense], input_shape, num_classes, data_range, name="linear")


ARCHITECTURES = {
    "mlp": lambda shape, k, seed=0: mlp(shape, k, hidden=(256,), seed=seed),
    "cnn": lambda shape, k, seed=0: small_cnn(shape, k, channels=(16, 32), kernel=3, seed=seed),
    "cnn5": lambda shape, k, seed=0: small_cnn(shape, k, channels=(8, 16, 32), kernel=5, seed=seed),
}
