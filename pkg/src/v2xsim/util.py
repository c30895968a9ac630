"""Small numeric helpers: dB/linear conversion and seeded stream derivation."""

from __future__ import annotations

import zlib

import numpy as np


def db_to_linear(db):
    """Convert dB (or dBm) values to linear ratios (or mW)."""
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(linear):
    """Convert linear ratios to dB. Zero maps to -inf."""
    lin = np.asarray(linear, dtype=float)
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(lin)


def stream(master_seed: int, purpose: str, *ids: int) -> np.random.Generator:
    """Derive an independent random stream from the master seed.

    Streams are keyed by a purpose label plus optional entity ids, so the
    draws of one subsystem never depend on how often another subsystem
    consumed randomness.
    """
    key = [int(master_seed) & 0xFFFFFFFF, zlib.crc32(purpose.encode("utf-8"))]
    key.extend(int(i) & 0xFFFFFFFF for i in ids)
    return np.random.default_rng(np.random.SeedSequence(key))
