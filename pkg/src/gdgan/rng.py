"""Deterministic seed derivation.

Every stochastic stage of the pipeline draws from its own stream keyed by
(master seed, stage labels), so stages can be re-run or resumed in any order
without perturbing each other.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_key(label: str) -> int:
    # stable across runs and platforms, unlike hash()
    return int.from_bytes(hashlib.blake2s(label.encode("utf-8"), digest_size=4).digest(), "little")


def seed_sequence(master_seed: int, *labels: str) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master_seed)] + [_label_key(l) for l in labels])


def np_rng(master_seed: int, *labels: str) -> np.random.Generator:
    """Fresh numpy generator for the stream named by ``labels``."""
    return np.random.Generator(np.random.PCG64(seed_sequence(master_seed, *labels)))


def derive_int_seed(master_seed: int, *labels: str) -> int:
    """63-bit integer seed for libraries that take a plain int (e.g. torch)."""
    state = seed_sequence(master_seed, *labels).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))
