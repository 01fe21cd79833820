"""Flat binary checkpoints for lists of named float64 arrays.

Layout::

    8 bytes   magic  b"RISCKPT1"
    4 bytes   header length N (little-endian uint32)
    N bytes   UTF-8 JSON header: {"version": 1, "meta": {...},
              "tensors": [{"name": str, "shape": [int, ...]}, ...]}
    rest      tensor values, row-major little-endian float64, concatenated
              in header order
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"RISCKPT1"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_arrays(path, named: list[tuple[str, np.ndarray]], meta: dict | None = None) -> None:
    header = {
        "version": VERSION,
        "meta": meta or {},
        "tensors": [{"name": name, "shape": list(arr.shape)} for name, arr in named],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for _, arr in named:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_arrays(path) -> tuple[list[tuple[str, np.ndarray]], dict]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    data = path.read_bytes()
    if data[:8] != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint file")
    (n,) = struct.unpack("<I", data[8:12])
    header = json.loads(data[12:12 + n].decode("utf-8"))
    if header.get("version") != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {header.get('version')}")
    offset = 12 + n
    out = []
    for spec in header["tensors"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape)
        out.append((spec["name"], arr.astype(np.float64)))
        offset += 8 * count
    if offset != len(data):
        raise CheckpointError(f"{path}: trailing bytes after last tensor")
    return out, header["meta"]


def assign(params: list[np.ndarray], arrays: list[np.ndarray]) -> None:
    """Copy loaded arrays into existing parameter arrays, checking shapes."""
    if len(params) != len(arrays):
        raise CheckpointError(f"expected {len(params)} tensors, got {len(arrays)}")
    for p, a in zip(params, arrays):
        if p.shape != a.shape:
            raise CheckpointError(f"shape mismatch: {p.shape} vs {a.shape}")
        p[...] = a
