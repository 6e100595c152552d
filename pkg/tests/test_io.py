import json
import struct

import numpy as np
import pytest

from sqba import data, io, nn
from sqba.errors import FormatError


def test_model_roundtrip(tmp_path, rng):
    net = nn.small_cnn((3, 8, 8), 4, channels=(2, 3), seed=5)
    net.meta["test_acc"] = 0.5
    io.save_model(net, tmp_path / "m.bin")
    back = io.load_model(tmp_path / "m.bin")
    x = rng.uniform(0, 1, (5, 3, 8, 8))
    np.testing.assert_array_equal(net.forward(x), back.forward(x))
    assert back.meta["test_acc"] == 0.5
    assert back.input_shape == net.input_shape


def test_dataset_roundtrip(tmp_path):
    ds = data.synthetic(50, num_classes=3, size=6, seed=0)
    io.save_dataset(ds, tmp_path / "d.bin")
    back = io.load_dataset(tmp_path / "d.bin")
    np.testing.assert_array_equal(back.images, ds.images.astype(np.float32))
    np.testing.assert_array_equal(back.labels, ds.labels)
    assert back.num_classes == 3


def test_truncated_model_rejected(tmp_path):
    io.save_model(nn.mlp((1, 3, 3), 2), tmp_path / "m.bin")
    raw = (tmp_path / "m.bin").read_bytes()
    (tmp_path / "cut.bin").write_bytes(raw[:-4])
    with pytest.raises(FormatError, match="payload"):
        io.load_model(tmp_path / "cut.bin")
    (tmp_path / "tiny.bin").write_bytes(raw[:10])
    with pytest.raises(FormatError):
        io.load_model(tmp_path / "tiny.bin")


def _rewrite_header(path, **changes):
    raw = path.read_bytes()
    (n,) = struct.unpack("<I", raw[8:12])
    header = json.loads(raw[12 : 12 + n])
    header.update(changes)
    blob = json.dumps(header).encode()
    path.write_bytes(raw[:8] + struct.pack("<I", len(blob)) + blob + raw[12 + n :])


def test_version_mismatch_rejected(tmp_path):
    p = tmp_path / "m.bin"
    io.save_model(nn.mlp((1, 3, 3), 2), p)
    _rewrite_header(p, format_version=99)
    with pytest.raises(FormatError, match="99"):
        io.load_model(p)


def test_wrong_magic_rejected(tmp_path):
    p = tmp_path / "d.bin"
    io.save_dataset(data.synthetic(10, num_classes=2, size=4), p)
    with pytest.raises(FormatError):
        io.load_model(p)


def test_non_finite_parameters_rejected(tmp_path):
    net = nn.mlp((1, 2, 2), 2)
    params = net.get_params()
    params[0][0, 0] = np.nan
    net.set_params(params)
    with pytest.raises(FormatError):
        io.save_model(net, tmp_path / "m.bin")
