"""Counter-based random numbers keyed by (master seed, trial, edge).

Every uniform variate is a pure function of its key, so results never depend
on evaluation order or on how trials are split across workers.
"""

from __future__ import annotations

import hashlib

MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15
_INV_2_53 = 1.0 / 9007199254740992.0


def splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def trial_key(master_seed: int, trial: int) -> int:
    """Stream key for one trial; independent of worker count by construction."""
    return splitmix64(splitmix64(master_seed & MASK64) ^ (trial & MASK64))


def stream_key(key: int, salt: int) -> int:
    return splitmix64(key ^ splitmix64(salt & MASK64))


def edge_hash(edge_key: bytes) -> int:
    return int.from_bytes(hashlib.blake2b(edge_key, digest_size=8).digest(), "little")


def uniform(edge_hash_value: int, key: int) -> float:
    """Uniform variate in [0, 1) for one edge under one stream key."""
    return (splitmix64(edge_hash_value ^ key) >> 11) * _INV_2_53
