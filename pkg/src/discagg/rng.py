"""Seeding contract for reproducible replica fan-out.

Every stochastic routine takes a :class:`numpy.random.Generator`. Replica
``r`` of an ensemble with base seed ``s`` draws from a PCG64 stream seeded
with ``splitmix64(s ^ r)``, so the result of a replica does not depend on
how many workers ran the ensemble or in which order.
"""
import numpy as np

MASK64 = (1 << 64) - 1

# Monte Carlo kernels advance replicas in fixed-size blocks that share one
# stream; block b of an ensemble is seeded like replica b.
BLOCK_SIZE = 1024


def splitmix64(x):
    """One round of the SplitMix64 output function on a 64-bit integer."""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def make_rng(seed):
    return np.random.Generator(np.random.PCG64(splitmix64(int(seed) & MASK64)))


def replica_rng(base_seed, r):
    return make_rng((int(base_seed) ^ int(r)) & MASK64)


def block_ranges(n, block=BLOCK_SIZE):
    """Yield ``(block_index, start, stop)`` covering ``range(n)``."""
    for b, start in enumerate(range(0, n, block)):
        yield b, start, min(start + block, n)


def derive_seed(base_seed, tag):
    """Base seed of a second ensemble that must not share streams with ``base_seed``.

    Replica streams are ``base ^ r``, so nearby bases overlap (``s ^ 1`` is
    replica 1 of ``s``). Mixing the tag through splitmix64 lands the derived
    ensemble in an unrelated region of the seed space.
    """
    return (int(base_seed) ^ splitmix64(int(tag) + 1)) & MASK64


def seed_from(rng):
    """Draw a fresh 64-bit base seed from a generator (for nested fan-out)."""
    return int(rng.integers(0, 2**63 - 1, dtype=np.int64))
