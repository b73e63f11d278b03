"""Named parameter groups with optimizer state, and checkpoint I/O.

Checkpoint layout (little-endian):

* 8-byte magic ``WSIMCKPT``
* uint32 format version (currently 1)
* uint32 JSON header length, then the UTF-8 JSON header: step counter,
  optional config block, and the ordered name/shape lists for parameter
  groups, first/second moments and buffers
* raw row-major float64 data for every group, in header order

Reloading reproduces inference bitwise: values are stored as raw float64.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"WSIMCKPT"
VERSION = 1


class ParamStore:
    """Trainable parameter groups plus Adam moments and running buffers."""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self.step = 0

    def add_param(self, name: str, value: np.ndarray) -> None:
        if name in self.params:
            raise ValueError(f"duplicate parameter group {name!r}")
        arr = np.array(value, dtype=np.float64)
        self.params[name] = arr
        self.m[name] = np.zeros_like(arr)
        self.v[name] = np.zeros_like(arr)

    def add_buffer(self, name: str, value: np.ndarray) -> None:
        if name in self.buffers:
            raise ValueError(f"duplicate buffer {name!r}")
        self.buffers[name] = np.array(value, dtype=np.float64)

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {name: np.zeros_like(arr) for name, arr in self.params.items()}

    def copy(self) -> "ParamStore":
        out = ParamStore()
        for name, arr in self.params.items():
            out.add_param(name, arr)
            out.m[name] = self.m[name].copy()
            out.v[name] = self.v[name].copy()
        for name, arr in self.buffers.items():
            out.add_buffer(name, arr)
        out.step = self.step
        return out


def save_checkpoint(store: ParamStore, path, config: dict | None = None) -> None:
    header = {
        "step": store.step,
        "config": config,
        "params": [[name, list(arr.shape)] for name, arr in store.params.items()],
        "buffers": [[name, list(arr.shape)] for name, arr in store.buffers.items()],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for group in (store.params, store.m, store.v, store.buffers):
            for arr in group.values():
                fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[ParamStore, dict | None]:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError(f"{path} is not a checkpoint file")
    (version,) = struct.unpack_from("<I", raw, 8)
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    (hlen,) = struct.unpack_from("<I", raw, 12)
    header = json.loads(raw[16 : 16 + hlen].decode("utf-8"))
    offset = 16 + hlen

    def take(shape) -> np.ndarray:
        nonlocal offset
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(shape)
        offset += count * 8
        return arr.astype(np.float64)

    store = ParamStore()
    for name, shape in header["params"]:
        store.add_param(name, take(shape))
    for name, shape in header["params"]:
        store.m[name] = take(shape)
    for name, shape in header["params"]:
        store.v[name] = take(shape)
    for name, shape in header["buffers"]:
        store.add_buffer(name, take(shape))
    store.step = int(header["step"])
    return store, header["config"]
