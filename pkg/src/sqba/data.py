"""Desk-scale image datasets."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass
class Dataset:
    images: np.ndarray  # (n, c, h, w) float64
    labels: np.ndarray  # (n,) int64
    num_classes: int
    data_range: tuple = (0.0, 1.0)

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4:
            raise DataError(f"images must be (n, c, h, w), got {self.images.shape}")
        if len(self.images) != len(self.labels):
            raise DataError("image and label counts differ")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise DataError("labels outside [0, num_classes)")
        if not np.all(np.isfinite(self.images)):
            raise DataError("non-finite pixel values")

    def __len__(self):
        return len(self.labels)

    @property
    def shape(self):
        return self.images.shape[1:]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.images[idx], self.labels[idx], self.num_classes, self.data_range)

    def split(self, test_fraction: float = 0.25, seed: int = 0):
        order = np.random.default_rng(seed).permutation(len(self))
        n_test = int(round(len(self) * test_fraction))
        return self.subset(np.sort(order[n_test:])), self.subset(np.sort(order[:n_test]))


def digits(upscale: int = 2) -> Dataset:
    """scikit-learn's 8x8 handwritten digits, scaled to [0, 1].

    ``upscale`` > 1 enlarges each image by bilinear interpolation (16x16 by
    default), which gives the attacks a less trivial input dimension.
    """
    from sklearn.datasets import load_digits

    raw = load_digits()
    images = raw.images.astype(np.float64) / 16.0
    if upscale > 1:
        from scipy.ndimage import zoom

        images = np.clip(zoom(images, (1, upscale, upscale), order=1), 0.0, 1.0)
    return Dataset(images[:, None], raw.target, 10)


def synthetic(n: int = 2000, num_classes: int = 10, size: int = 12, seed: int = 0, noise: float = 0.1) -> Dataset:
    """Blurred class prototypes plus pixel noise; ``num_classes``-way, one channel."""
    from scipy.ndimage import gaussian_filter

    rng = np.random.default_rng(seed)
    protos = rng.random((num_classes, size, size))
    protos = np.stack([gaussian_filter(p, 1.5) for p in protos])
    lo = protos.min(axis=(1, 2), keepdims=True)
    hi = protos.max(axis=(1, 2), keepdims=True)
    protos = (protos - lo) / (hi - lo)
    labels = rng.integers(0, num_classes, n)
    images = protos[labels] + noise * rng.normal(size=(n, size, size))
    return Dataset(np.clip(images, 0.0, 1.0)[:, None], labels, num_classes)


def blobs(n: int = 400, dim: int = 2, seed: int = 0, gap: float = 8.0) -> Dataset:
    """Two unit Gaussian clusters ``gap`` apart along the first axis, shaped (n, 1, 1, dim)."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, n)
    centers = np.zeros((2, dim))
    centers[1, 0] = gap
    x = centers[labels] + rng.normal(size=(n, dim))
    return Dataset(x[:, None, None, :], labels, 2, (float(x.min()), float(x.max())))


SHAPE_NAMES = ("disc", "ring", "square", "frame", "triangle", "hbar", "vbar", "plus", "cross", "diamond")


def _shape_mask(kind: int, size: int, cy, cx, r):
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    dy, dx = yy - cy, xx - cx
    dist = np.hypot(dy, dx)
    cheb = np.maximum(np.abs(dy), np.abs(dx))
    w = max(r * 0.35, 1.0)
    name = SHAPE_NAMES[kind]
    if name == "disc":
        m = dist <= r
    elif name == "ring":
        m = (dist <= r) & (dist >= r - w)
    elif name == "square":
        m = cheb <= r * 0.85
    elif name == "frame":
        m = (cheb <= r * 0.9) & (cheb >= r * 0.9 - w)
    elif name == "triangle":
        m = (dy <= r * 0.8) & (dy >= -r) & (np.abs(dx) <= (dy + r) * 0.55)
    elif name == "hbar":
        m = (np.abs(dy) <= w * 0.8) & (np.abs(dx) <= r)
    elif name == "vbar":
        m = (np.abs(dx) <= w * 0.8) & (np.abs(dy) <= r)
    elif name == "plus":
        m = ((np.abs(dy) <= w * 0.6) | (np.abs(dx) <= w * 0.6)) & (cheb <= r)
    elif name == "cross":
        m = ((np.abs(dy - dx) <= w * 0.9) | (np.abs(dy + dx) <= w * 0.9)) & (cheb <= r * 0.9)
    else:
        m = np.abs(dy) + np.abs(dx) <= r
    return m.astype(np.float64)


def shapes(n: int = 3000, size: int = 16, channels: int = 3, seed: int = 0, noise: float = 0.04) -> Dataset:
    """Ten geometric shapes on colour-graded, noisy backgrounds.

    A stand-in for small natural-image benchmarks: foreground and background
    colours, position, scale and shading vary per image, so pixel norms are
    large relative to the class-defining structure.
    """
    from scipy.ndimage import gaussian_filter

    rng = np.random.default_rng(seed)
    labels = rng.integers(0, len(SHAPE_NAMES), n)
    images = np.empty((n, channels, size, size))
    yy, xx = np.mgrid[0:size, 0:size] / (size - 1)
    for i, k in enumerate(labels):
        r = rng.uniform(0.3, 0.4) * size
        cy, cx = size / 2 - 0.5 + rng.uniform(-1.5, 1.5, 2)
        mask = gaussian_filter(_shape_mask(int(k), size, cy, cx, r), 0.5)
        base = rng.uniform(0.3, 0.7)
        bg_a = np.clip(base + rng.uniform(-0.15, 0.15, channels), 0, 1)
        bg_b = np.clip(base + rng.uniform(-0.15, 0.15, channels), 0, 1)
        angle = rng.uniform(0, 2 * np.pi)
        ramp = 0.5 + 0.5 * (np.cos(angle) * (xx - 0.5) + np.sin(angle) * (yy - 0.5))
        bg = bg_a[:, None, None] * (1 - ramp) + bg_b[:, None, None] * ramp
        # shapes are brighter or darker than the background by a fixed-ish margin
        sign = 1.0 if rng.random() < 0.5 else -1.0
        fg = np.clip(base + sign * rng.uniform(0.3, 0.45) + rng.uniform(-0.1, 0.1, channels), 0, 1)
        img = bg * (1 - mask) + fg[:, None, None] * mask
        images[i] = img + noise * rng.normal(size=img.shape)
    return Dataset(np.clip(images, 0.0, 1.0), labels, len(SHAPE_NAMES))


DATASETS = {"digits": digits, "synthetic": synthetic, "shapes": shapes}
