"""Counter-based seeding for Monte Carlo loops.

Trials are cut into fixed-size blocks; block ``b`` draws from a generator
seeded by ``SeedSequence(seed, spawn_key=(b,))``.  The partition does not
depend on the number of workers, so results are identical for any
parallelism level as long as reductions are done in block order.
"""

from __future__ import annotations

import secrets
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

import numpy as np

BLOCK_SIZE = 1 << 16
SEED_BITS = 64

R = TypeVar("R")


def check_seed(seed: int) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    seed = int(seed)
    if not 0 <= seed < 1 << SEED_BITS:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def fresh_seed() -> int:
    return secrets.randbits(SEED_BITS)


def derive_seed(seed: int, tag: int) -> int:
    """Independent child seed for a labelled sub-experiment.

    Uses a spawn key outside the range of block indices so child streams
    never coincide with the parent's block streams.
    """
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=(1 << 32, tag))
    return int(ss.generate_state(1, np.uint64)[0])


def block_sizes(trials: int, block_size: int = BLOCK_SIZE) -> list[int]:
    full, rest = divmod(trials, block_size)
    return [block_size] * full + ([rest] if rest else [])


def block_generator(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def map_blocks(
    fn: Callable[[np.random.Generator, int], R],
    trials: int,
    seed: int,
    workers: int = 1,
    block_size: int = BLOCK_SIZE,
) -> list[R]:
    """Apply ``fn(rng, size)`` to every block; results come back in block order."""
    seed = check_seed(seed)
    sizes = block_sizes(trials, block_size)

    def run(item):
        index, size = item
        return fn(block_generator(seed, index), size)

    items = list(enumerate(sizes))
    if workers <= 1 or len(items) <= 1:
        return [run(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, items))
