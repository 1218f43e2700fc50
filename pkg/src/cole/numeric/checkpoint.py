"""Versioned binary checkpoint files: named arrays plus a JSON meta block.

Layout: 8-byte magic, u32 version, u64 manifest length, JSON manifest, then the
raw array buffers concatenated in manifest order. Round-trips bit-exactly.
"""

import json
import struct

import numpy as np

MAGIC = b"COLECKPT"
VERSION = 1


def save_checkpoint(path, arrays, meta=None):
    entries = []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        entries.append({"name": name, "dtype": str(arr.dtype),
                        "shape": list(arr.shape), "nbytes": arr.nbytes})
    manifest = json.dumps({"meta": meta or {}, "tensors": entries}).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IQ", VERSION, len(manifest)))
        f.write(manifest)
        for name in arrays:
            f.write(np.ascontiguousarray(arrays[name]).tobytes())


def load_checkpoint(path):
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a checkpoint file (bad magic)")
        version, mlen = struct.unpack("<IQ", f.read(12))
        if version != VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        manifest = json.loads(f.read(mlen).decode("utf-8"))
        arrays = {}
        for entry in manifest["tensors"]:
            raw = f.read(entry["nbytes"])
            arr = np.frombuffer(raw, dtype=np.dtype(entry["dtype"]))
            arrays[entry["name"]] = arr.reshape(entry["shape"]).copy()
    return arrays, manifest["meta"]
