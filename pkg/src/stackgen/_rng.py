"""Deterministic 64-bit random streams used everywhere randomness is needed.

The generator is splitmix64. It is implemented twice -- here and inside the
compiled kernels -- with identical arithmetic, so fitted models do not depend
on which kernel backend is active. Seeds for individual tasks are derived
from a single master seed with `derive_seed`, which makes results independent
of the order in which parallel tasks run.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """One splitmix64 finalization step (the documented 64-bit mix)."""
    z = (z + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(master: int, *indices: int) -> int:
    """Fold stream indices into a master seed.

    seed = mix64(master); then for each index i: seed = mix64(seed ^ mix64(i)).
    Every consumer of randomness (fold assignment, each (learner, fold) fit
    task, each tree, ...) gets its own stream index path, so no two tasks
    share a stream and the parallel schedule cannot affect results.
    """
    s = mix64(master & _MASK)
    for ix in indices:
        s = mix64(s ^ mix64(ix & _MASK))
    return s


class SplitMix64:
    """Tiny sequential PRNG over the splitmix64 stream."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def randint(self, bound: int) -> int:
        """Uniform int in [0, bound). Modulo reduction; the tiny bias is
        irrelevant at machine-learning sample sizes."""
        return self.next_u64() % bound

    def uniform(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        n = len(items)
        for i in range(n - 1):
            j = i + self.randint(n - i)
            items[i], items[j] = items[j], items[i]

    def sample_sorted(self, n: int, k: int) -> list[int]:
        """k distinct indices from range(n), returned in ascending order."""
        arr = list(range(n))
        for i in range(k):
            j = i + self.randint(n - i)
            arr[i], arr[j] = arr[j], arr[i]
        return sorted(arr[:k])
