"""Deterministic RNG substreams.

Every source of randomness in a run is a named child stream of one master
seed, so a single seed reproduces the whole run and concurrent pipelines
(different cases / prefix lengths) draw from independent streams.
"""

import hashlib

import numpy as np


def _tag_to_int(tag) -> int:
    digest = hashlib.sha256(repr(tag).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def subseed(seed: int, *tags) -> int:
    """Derive a child seed from a master seed and a stream name."""
    material = repr((int(seed),) + tuple(tags)).encode("utf-8")
    digest = hashlib.sha256(material).digest()
    return int.from_bytes(digest[:8], "big")


def substream(seed: int, *tags) -> np.random.Generator:
    """Generator for the named child stream of ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(subseed(seed, *tags)))
