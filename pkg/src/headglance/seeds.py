"""Deterministic RNG substreams.

Every random choice in the library flows from one master seed through a
named substream, so any single Monte-Carlo iteration (or any single
driver's trace) can be regenerated in isolation without replaying the
rest of the run.
"""
from __future__ import annotations

import zlib

import numpy as np


def substream(master_seed: int, purpose: str, *indices: int) -> np.random.Generator:
    """Return a generator keyed by (master seed, purpose label, indices).

    The purpose string is hashed with crc32, which is stable across
    platforms and Python versions (unlike ``hash``).
    """
    key = [int(master_seed) & 0xFFFFFFFF, zlib.crc32(purpose.encode("utf-8"))]
    key.extend(int(i) & 0xFFFFFFFF for i in indices)
    return np.random.default_rng(np.random.SeedSequence(key))
