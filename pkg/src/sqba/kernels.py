"""Convolution and pooling kernels.

Each op has a loop kernel compiled by numba (``*_loop``) and a vectorised numpy
version (``*_numpy``). The public names dispatch to the loop kernels when numba
is importable and not disabled, otherwise to numpy.

Layout is NCHW, stride 1, no implicit padding (callers pad).
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._accel import HAVE_NUMBA, njit


# Loop order keeps the two spatial loops innermost so the hot loop walks
# contiguous memory and the compiler can vectorise it.
@njit(cache=True)
def conv_forward_loop(x, w, b):
    n, c, h, wd = x.shape
    f, _, k, _ = w.shape
    ho = h - k + 1
    wo = wd - k + 1
    out = np.empty((n, f, ho, wo))
    for i in range(n):
        for o in range(f):
            out[i, o] = b[o]
            for ch in range(c):
                for p in range(k):
                    for q in range(k):
                        wv = w[o, ch, p, q]
                        for r in range(ho):
                            for s in range(wo):
                                out[i, o, r, s] += wv * x[i, ch, r + p, s + q]
    return out


@njit(cache=True)
def conv_backward_input_loop(g, w, h, wd):
    n, f, ho, wo = g.shape
    _, c, k, _ = w.shape
    dx = np.zeros((n, c, h, wd))
    for i in range(n):
        for o in range(f):
            for ch in range(c):
                for p in range(k):
                    for q in range(k):
                        wv = w[o, ch, p, q]
                        for r in range(ho):
                            for s in range(wo):
                                dx[i, ch, r + p, s + q] += wv * g[i, o, r, s]
    return dx


@njit(cache=True)
def conv_backward_weight_loop(x, g, k):
    n, c, _, _ = x.shape
    _, f, ho, wo = g.shape
    dw = np.zeros((f, c, k, k))
    for i in range(n):
        for o in range(f):
            for ch in range(c):
                for p in range(k):
                    for q in range(k):
                        acc = 0.0
                        for r in range(ho):
                            for s in range(wo):
                                acc += g[i, o, r, s] * x[i, ch, r + p, s + q]
                        dw[o, ch, p, q] += acc
    return dw


@njit(cache=True)
def maxpool_forward_loop(x, size):
    n, c, h, wd = x.shape
    ho = h // size
    wo = wd // size
    out = np.empty((n, c, ho, wo))
    arg = np.empty((n, c, ho, wo), dtype=np.int64)
    for i in range(n):
        for ch in range(c):
            for r in range(ho):
                for s in range(wo):
                    best = x[i, ch, r * size, s * size]
                    bi = 0
                    for p in range(size):
                        for q in range(size):
                            v = x[i, ch, r * size + p, s * size + q]
                            if v > best:
                                best = v
                                bi = p * size + q
                    out[i, ch, r, s] = best
                    arg[i, ch, r, s] = bi
    return out, arg


@njit(cache=True)
def maxpool_backward_loop(g, arg, size, h, wd):
    n, c, ho, wo = g.shape
    dx = np.zeros((n, c, h, wd))
    for i in range(n):
        for ch in range(c):
            for r in range(ho):
                for s in range(wo):
                    bi = arg[i, ch, r, s]
                    dx[i, ch, r * size + bi // size, s * size + bi % size] += g[i, ch, r, s]
    return dx


def conv_forward_numpy(x, w, b):
    k = w.shape[2]
    win = sliding_window_view(x, (k, k), axis=(2, 3))  # n, c, ho, wo, k, k
    return np.einsum("ncrspq,fcpq->nfrs", win, w, optimize=True) + b[None, :, None, None]


def conv_backward_input_numpy(g, w, h, wd):
    k = w.shape[2]
    gp = np.pad(g, ((0, 0), (0, 0), (k - 1, k - 1), (k - 1, k - 1)))
    win = sliding_window_view(gp, (k, k), axis=(2, 3))  # n, f, h, wd, k, k
    flipped = w[:, :, ::-1, ::-1]
    return np.einsum("nfrspq,fcpq->ncrs", win, flipped, optimize=True)[:, :, :h, :wd]


def conv_backward_weight_numpy(x, g, k):
    win = sliding_window_view(x, (k, k), axis=(2, 3))
    ho, wo = g.shape[2], g.shape[3]
    return np.einsum("ncrspq,nfrs->fcpq", win[:, :, :ho, :wo], g, optimize=True)


def maxpool_forward_numpy(x, size):
    n, c, h, wd = x.shape
    ho, wo = h // size, wd // size
    blocks = x[:, :, : ho * size, : wo * size].reshape(n, c, ho, size, wo, size)
    blocks = blocks.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho, wo, size * size)
    arg = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]
    return out, arg


def maxpool_backward_numpy(g, arg, size, h, wd):
    n, c, ho, wo = g.shape
    onehot = np.zeros((n, c, ho, wo, size * size))
    np.put_along_axis(onehot, arg[..., None], g[..., None], axis=-1)
    onehot = onehot.reshape(n, c, ho, wo, size, size).transpose(0, 1, 2, 4, 3, 5)
    dx = np.zeros((n, c, h, wd))
    dx[:, :, : ho * size, : wo * size] = onehot.reshape(n, c, ho * size, wo * size)
    return dx


if HAVE_NUMBA:
    conv_forward = conv_forward_loop
    conv_backward_input = conv_backward_input_loop
    conv_backward_weight = conv_backward_weight_loop
    maxpool_forward = maxpool_forward_loop
    maxpool_backward = maxpool_backward_loop
else:
    conv_forward = conv_forward_numpy
    conv_backward_input = conv_backward_input_numpy
    conv_backward_weight = conv_backward_weight_numpy
    maxpool_forward = maxpool_forward_numpy
    maxpool_backward = maxpool_backward_numpy
