"""Deterministic RNG derivation: every random draw in a run descends from the
run seed through a named path, so repeated runs are bitwise identical."""

from __future__ import annotations

import hashlib

import numpy as np


def _part_to_int(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFFFFFFFFFF
    if isinstance(part, str):
        digest = hashlib.blake2b(part.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "big")
    raise TypeError(f"seed path parts must be int or str, got {type(part)!r}")


def seed_seq(seed: int, *path) -> np.random.SeedSequence:
    return np.random.SeedSequence([_part_to_int(seed)] + [_part_to_int(p) for p in path])


def rng_for(seed: int, *path) -> np.random.Generator:
    return np.random.default_rng(seed_seq(seed, *path))
