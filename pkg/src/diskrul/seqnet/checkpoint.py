"""Versioned model checkpoint container.

Layout::

    b"DRULCKPT" | version u32 LE | header length u32 LE | JSON header | tensor bytes

The JSON header (sorted keys, no timestamps) lists every tensor with its
name, shape and byte offset. Tensors are stored little-endian in the
precision they were trained in; parameters come first, then the Adam first
and second moments when present.
"""
from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

from ..errors import SchemaError
from .model import EncoderDecoderConfig, EncoderDecoderModel

MAGIC = b"DRULCKPT"
VERSION = 1


def _tensor_table(model):
    groups = [("param", model.params)]
    st = model.optimizer_state
    if st is not None:
        groups += [("adam_m", st["m"]), ("adam_v", st["v"])]
    return [(f"{g}/{name}", arr) for g, tensors in groups for name, arr in tensors.items()]


def to_bytes(model: EncoderDecoderModel, meta: dict | None = None) -> bytes:
    dt = "<f4" if model.precision == "single" else "<f8"
    entries, blobs, offset = [], [], 0
    for name, arr in _tensor_table(model):
        raw = np.ascontiguousarray(arr, dtype=dt).tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    st = model.optimizer_state
    header = {
        "format": "diskrul-checkpoint",
        "config": model.config.to_dict(),
        "dtype": dt,
        "byte_order": "little",
        "output": {
            "shift": model.output_shift,
            "scale": model.output_scale,
            "transform": model.target_transform,
        },
        "epoch": int(model.epoch),
        "adam": None if st is None else {
            k: st[k] for k in ("step", "lr", "beta1", "beta2", "epsilon") if k in st
        },
        "tensors": entries,
        "meta": meta or {},
    }
    blob = json.dumps(header, sort_keys=True).encode()
    return MAGIC + struct.pack("<II", VERSION, len(blob)) + blob + b"".join(blobs)


def save(model: EncoderDecoderModel, path, meta: dict | None = None) -> str:
    """Write a checkpoint and return its sha256 hex digest."""
    data = to_bytes(model, meta)
    with open(path, "wb") as fh:
        fh.write(data)
    return hashlib.sha256(data).hexdigest()


def from_bytes(data: bytes):
    """Return ``(model, meta)`` from checkpoint bytes."""
    if data[:8] != MAGIC:
        raise SchemaError("not a diskrul checkpoint")
    version, hlen = struct.unpack_from("<II", data, 8)
    if version != VERSION:
        raise SchemaError(f"unsupported checkpoint version {version}")
    header = json.loads(data[16 : 16 + hlen])
    base = 16 + hlen
    dt = np.dtype(header["dtype"])
    native = np.float32 if dt.itemsize == 4 else np.float64
    tensors = {}
    for e in header["tensors"]:
        count = int(np.prod(e["shape"])) if e["shape"] else 1
        arr = np.frombuffer(data, dtype=dt, count=count, offset=base + e["offset"])
        tensors[e["name"]] = arr.reshape(e["shape"]).astype(native)
    config = EncoderDecoderConfig.from_dict(header["config"])
    params = {n.split("/", 1)[1]: a for n, a in tensors.items() if n.startswith("param/")}
    out = header["output"]
    model = EncoderDecoderModel(config, params, out["shift"], out["scale"], out["transform"])
    model.epoch = header.get("epoch", 0)
    if header.get("adam") is not None:
        model.optimizer_state = {
            **header["adam"],
            "m": {n.split("/", 1)[1]: a for n, a in tensors.items() if n.startswith("adam_m/")},
            "v": {n.split("/", 1)[1]: a for n, a in tensors.items() if n.startswith("adam_v/")},
        }
    return model, header.get("meta", {})


def load(path):
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
