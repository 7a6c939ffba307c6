"""Weight checkpoint files.

Layout: magic "DRIW", version u32, then repeated records of
(name length u32, name bytes, rows u32, cols u32, little-endian f64 values).
Round trips are bit-exact.
"""
import struct

import numpy as np

MAGIC = b"DRIW"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_arrays(path, arrays):
    """Write an ordered {name: 2-D float64 array} mapping."""
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        for name, arr in arrays.items():
            arr = np.ascontiguousarray(arr, dtype="<f8")
            if arr.ndim != 2:
                raise CheckpointError(f"{name}: checkpoint records are 2-D")
            raw = name.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
            f.write(struct.pack("<II", arr.shape[0], arr.shape[1]))
            f.write(arr.tobytes())


def load_arrays(path):
    """Read back a {name: array} mapping in file order."""
    out = {}
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise CheckpointError(f"{path}: bad magic")
        (version,) = struct.unpack("<I", f.read(4))
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported version {version}")
        while True:
            head = f.read(4)
            if not head:
                break
            (nlen,) = struct.unpack("<I", head)
            name = f.read(nlen).decode("utf-8")
            rows, cols = struct.unpack("<II", f.read(8))
            data = np.frombuffer(f.read(rows * cols * 8), dtype="<f8")
            if data.size != rows * cols:
                raise CheckpointError(f"{path}: truncated record {name}")
            out[name] = data.reshape(rows, cols).copy()
    return out


def save_params(path, params):
    """Checkpoint a list of Parameters (names must be unique)."""
    mapping = {}
    for p in params:
        if p.name in mapping:
            raise CheckpointError(f"duplicate parameter name {p.name}")
        mapping[p.name] = p.data
    save_arrays(path, mapping)


def load_params(path, params):
    """Load values into an existing parameter list, in place."""
    arrays = load_arrays(path)
    for p in params:
        if p.name not in arrays:
            raise CheckpointError(f"checkpoint missing parameter {p.name}")
        arr = arrays[p.name]
        if arr.shape != p.data.shape:
            raise CheckpointError(
                f"{p.name}: checkpoint shape {arr.shape} != model shape {p.data.shape}")
        p.data = arr
