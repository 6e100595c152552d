"""Model and dataset files.

Both share one layout: an 8-byte magic, a little-endian uint32 header length,
a UTF-8 JSON header, then raw little-endian payload bytes.

* model payload: float32 parameters, layers in order, each layer's weight then bias.
* dataset payload: float32 images (n*c*h*w) followed by uint8 labels (n).
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .data import Dataset
from .errors import FormatError
from .nn import Network, layer_from_description

FORMAT_VERSION = 1
MODEL_MAGIC = b"SQBANET\x00"
DATA_MAGIC = b"SQBADAT\x00"


def _write(path, magic, header, payload: bytes):
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(payload)


def _read(path, magic, what):
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:8] != magic:
        raise FormatError(f"{path}: not a {what} file")
    (n,) = struct.unpack("<I", raw[8:12])
    if len(raw) < 12 + n:
        raise FormatError(f"{path}: truncated header")
    try:
        header = json.loads(raw[12 : 12 + n].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: malformed header ({exc})") from exc
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: format version {version!r} unsupported (expected {FORMAT_VERSION})")
    return header, raw[12 + n :]


def save_model(net: Network, path) -> None:
    if not all(np.all(np.isfinite(p)) for p in net.get_params()):
        raise FormatError("refusing to save a model with non-finite parameters")
    meta = {k: v for k, v in net.meta.items() if k != "train_log"}
    header = {
        "format_version": FORMAT_VERSION,
        "name": net.name,
        "input_shape": list(net.input_shape),
        "num_classes": net.num_classes,
        "data_range": list(net.data_range),
        "layers": net.describe(),
        "param_shapes": [list(p.shape) for p in net.get_params()],
        "meta": meta,
    }
    payload = b"".join(np.asarray(p, dtype="<f4").tobytes() for p in net.get_params())
    _write(path, MODEL_MAGIC, header, payload)


def load_model(path) -> Network:
    header, payload = _read(path, MODEL_MAGIC, "model")
    try:
        layers = [layer_from_description(d) for d in header["layers"]]
        net = Network(layers, tuple(header["input_shape"]), header["num_classes"],
                      tuple(header["data_range"]), header.get("name", "net"), header.get("meta", {}))
        shapes = [tuple(s) for s in header["param_shapes"]]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: incomplete header ({exc})") from exc
    expected = [p.shape for p in net.get_params()]
    if shapes != expected:
        raise FormatError(f"{path}: parameter shapes {shapes} do not match architecture {expected}")
    sizes = [int(np.prod(s)) for s in shapes]
    if len(payload) != 4 * sum(sizes):
        raise FormatError(f"{path}: payload is {len(payload)} bytes, expected {4 * sum(sizes)}")
    flat = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    if not np.all(np.isfinite(flat)):
        raise FormatError(f"{path}: non-finite weights")
    params, offset = [], 0
    for shape, size in zip(shapes, sizes):
        params.append(flat[offset : offset + size].reshape(shape))
        offset += size
    net.set_params(params)
    return net


def save_dataset(ds: Dataset, path) -> None:
    header = {
        "format_version": FORMAT_VERSION,
        "count": len(ds),
        "shape": list(ds.shape),
        "k": ds.num_classes,
        "data_range": list(ds.data_range),
    }
    payload = ds.images.astype("<f4").tobytes() + ds.labels.astype(np.uint8).tobytes()
    _write(path, DATA_MAGIC, header, payload)


def load_dataset(path) -> Dataset:
    header, payload = _read(path, DATA_MAGIC, "dataset")
    try:
        n, shape, k = int(header["count"]), tuple(header["shape"]), int(header["k"])
        data_range = tuple(header.get("data_range", (0.0, 1.0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: incomplete header ({exc})") from exc
    m = n * int(np.prod(shape))
    if len(payload) != 4 * m + n:
        raise FormatError(f"{path}: payload is {len(payload)} bytes, expected {4 * m + n}")
    images = np.frombuffer(payload[: 4 * m], dtype="<f4").astype(np.float64).reshape((n,) + shape)
    labels = np.frombuffer(payload[4 * m :], dtype=np.uint8).astype(np.int64)
    return Dataset(images, labels, k, data_range)
