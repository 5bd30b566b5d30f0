"""Seeded pseudo-random primitives shared by sampling and target assignment.

All randomness in the package flows through this module so that run
manifests can name a single generator and any consumer can re-create a
draw from (generator name, seed) alone.  The generator is the stdlib
Mersenne Twister driven through ``getrandbits`` rejection sampling and a
partial Fisher-Yates shuffle, which is stable across platforms and
Python versions.
"""

from __future__ import annotations

import random
from typing import Sequence, TypeVar

T = TypeVar("T")

# Recorded in every sampling manifest; bump only with a new module.
GENERATOR_NAME = "mt19937-fisher-yates"


def make_rng(seed: int) -> random.Random:
    """Return a fresh generator for ``seed``."""
    return random.Random(seed)


def randbelow(rng: random.Random, n: int) -> int:
    """Uniform integer in [0, n) via rejection sampling on getrandbits."""
    if n <= 0:
        raise ValueError(f"randbelow requires n >= 1, got {n}")
    k = n.bit_length()
    r = rng.getrandbits(k)
    while r >= n:
        r = rng.getrandbits(k)
    return r


def sample_indices(rng: random.Random, population: int, size: int) -> list[int]:
    """Draw ``size`` distinct indices from [0, population).

    Partial Fisher-Yates: the returned order is the shuffled prefix, not
    the original order, so equal (seed, population, size) always yields
    the identical ordered selection.
    """
    if not 0 <= size <= population:
        raise ValueError(f"cannot sample {size} from population {population}")
    idx = list(range(population))
    for i in range(size):
        j = i + randbelow(rng, population - i)
        idx[i], idx[j] = idx[j], idx[i]
    return idx[:size]


def shuffled(rng: random.Random, items: Sequence[T]) -> list[T]:
    """Full Fisher-Yates shuffle of a copy of ``items``."""
    out = list(items)
    for i in range(len(out) - 1, 0, -1):
        j = randbelow(rng, i + 1)
        out[i], out[j] = out[j], out[i]
    return out


def derangement(rng: random.Random, size: int) -> list[int]:
    """Permutation of range(size) with no fixed point, by rejection.

    Size 1 admits no derangement; size 2 has exactly one, the swap.
    Expected number of attempts converges to e, so rejection is cheap at
    any size this package meets.
    """
    if size < 2:
        raise ValueError(f"no derangement exists for size {size}")
    while True:
        perm = shuffled(rng, range(size))
        if all(perm[i] != i for i in range(size)):
            return perm
