"""Deterministic 64-bit PRNG (splitmix64) shared by simulation and augmentation.

Fixed to this exact algorithm so that corpus generation, holdout splits
and token dropout are bit-identical across processes and platforms.
"""

from __future__ import annotations

import hashlib

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX_MUL_1 = 0xBF58476D1CE4E5B9
MIX_MUL_2 = 0x94D049BB133111EB


def prng_next(state: int) -> tuple[int, int]:
    """Advance splitmix64 once: returns (value, new_state)."""
    state = (state + GOLDEN_GAMMA) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * MIX_MUL_1) & MASK64
    z = ((z ^ (z >> 27)) * MIX_MUL_2) & MASK64
    return (z ^ (z >> 31)), state


def unit_float(value: int) -> float:
    """Map a 64-bit draw to [0, 1)."""
    return value / 2.0**64


def hash64(data: bytes) -> int:
    """SHA-256 truncated to its first 8 bytes, big-endian."""
    return int.from_bytes(hashlib.sha256(data).digest()[:8], "big")


def record_scoped_state(seed: int, record_id: str) -> int:
    """Per-record PRNG state: the seed mixed with a hash of the record id."""
    return (seed ^ hash64(record_id.encode("utf-8"))) & MASK64
