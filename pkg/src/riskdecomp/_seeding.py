"""Stable sub-stream seed derivation.

Seeds are derived by hashing so that a trial's random streams depend only on
(master seed, label, index), never on execution order or worker count.
"""

import hashlib

import numpy as np


def child_seed(master_seed: int, label: str, index: int = 0) -> int:
    """Return a stable 64-bit seed for the sub-stream ``(master_seed, label, index)``."""
    payload = f"{int(master_seed)}|{label}|{int(index)}".encode()
    digest = hashlib.blake2b(payload, digest_size=8).digest()
    return int.from_bytes(digest, "little")


def child_rng(master_seed: int, label: str, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(child_seed(master_seed, label, index))
