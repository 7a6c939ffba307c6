import numpy as np
import pytest

from drinet.checkpoint import (CheckpointError, load_arrays, load_params,
                               save_arrays, save_params)
from drinet.tensor import Parameter


def test_roundtrip_bit_exact(tmp_path, rng):
    arrays = {
        "layer.w": rng.standard_normal((7, 3)),
        "layer.b": rng.standard_normal((1, 3)),
        "odd/name with spaces": rng.standard_normal((2, 2)),
    }
    path = tmp_path / "ckpt.driw"
    save_arrays(path, arrays)
    back = load_arrays(path)
    assert list(back) == list(arrays)
    for name in arrays:
        assert back[name].tobytes() == arrays[name].tobytes()


def test_magic_and_layout(tmp_path):
    path = tmp_path / "c.driw"
    save_arrays(path, {"a": np.zeros((1, 1))})
    raw = path.read_bytes()
    assert raw[:4] == b"DRIW"
    assert int.from_bytes(raw[4:8], "little") == 1


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.driw"
    path.write_bytes(b"XXXX" + b"\0" * 16)
    with pytest.raises(CheckpointError):
        load_arrays(path)


def test_param_save_load(tmp_path, rng):
    p = Parameter(rng.standard_normal((3, 4)), "p")
    q = Parameter(np.zeros((3, 4)), "p")
    path = tmp_path / "p.driw"
    save_params(path, [p])
    load_params(path, [q])
    assert q.data.tobytes() == p.data.tobytes()


def test_missing_param_rejected(tmp_path, rng):
    p = Parameter(rng.standard_normal((2, 2)), "a")
    path = tmp_path / "p.driw"
    save_params(path, [p])
    with pytest.raises(CheckpointError):
        load_params(path, [Parameter(np.zeros((2, 2)), "b")])


def test_shape_mismatch_rejected(tmp_path, rng):
    p = Parameter(rng.standard_normal((2, 2)), "a")
    path = tmp_path / "p.driw"
    save_params(path, [p])
    with pytest.raises(CheckpointError):
        load_params(path, [Parameter(np.zeros((3, 2)), "a")])
