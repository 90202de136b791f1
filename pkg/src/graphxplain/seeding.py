"""Deterministic random-stream derivation.

Every run of a pipeline component takes one root seed. Internal consumers
never share a generator; they derive their own stream with
``derive_rng(root, "label", ...)``. Each label is hashed with CRC-32 and
the sequence ``[root, *hashes]`` keys a ``numpy.random.SeedSequence``, so

* the same root seed and labels always reproduce the same stream,
* streams with different labels are statistically independent,
* adding a new consumer never perturbs existing ones.
"""

from __future__ import annotations

import zlib

import numpy as np


def child_sequence(root_seed: int, *labels: str | int) -> np.random.SeedSequence:
    """SeedSequence for a named child stream of ``root_seed``."""
    keys = [int(root_seed) & 0xFFFFFFFF]
    for label in labels:
        keys.append(zlib.crc32(str(label).encode("utf8")))
    return np.random.SeedSequence(keys)


def derive_rng(root_seed: int, *labels: str | int) -> np.random.Generator:
    """Generator for a named child stream of ``root_seed``."""
    return np.random.default_rng(child_sequence(root_seed, *labels))


def derive_seed(root_seed: int, *labels: str | int) -> int:
    """Plain integer seed derived from a named child stream."""
    return int(derive_rng(root_seed, *labels).integers(0, 2**31 - 1))
