"""Stable derived RNG streams.

Training keeps one independent stream per purpose (batch order, each model's
neighbor sampling, dropout, ...) so that joint and standalone runs consume
identical sequences per model. Streams are derived from the run seed plus
string labels via sha256, which is stable across processes and platforms.
"""

import hashlib

import numpy as np


def derive_seed(*parts):
    blob = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "little")


def derive_rng(*parts):
    return np.random.default_rng(derive_seed(*parts))
