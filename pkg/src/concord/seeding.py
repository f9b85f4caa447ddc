"""Deterministic named substreams derived from one run seed."""

import hashlib

import numpy as np


def substream(seed: int, name: str) -> np.random.Generator:
    """Generator for a named purpose, stable across runs and platforms."""
    tag = int.from_bytes(hashlib.sha256(name.encode()).digest()[:8], "little")
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag]))
