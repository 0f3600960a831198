"""Portable seeded randomness.

SplitMix64 is the named generator behind every selection the toolkit makes
(poison picks, GEN/VAL splits, overlay picks, label-guess fallbacks). It keeps
a single 64-bit state word and is easy to port, so the same seed yields the same
split in any implementation:

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    return z ^ (z >> 31)

(all arithmetic modulo 2**64).

Bulk numeric draws (pixel noise, weight init) go through numpy's PCG64 seeded
with `derive_seed`, so a master seed still fixes everything.
"""

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _token_value(token: int | str) -> int:
    if isinstance(token, int):
        return token & MASK64
    # FNV-1a over UTF-8, stable across processes (unlike hash()).
    value = 0xCBF29CE484222325
    for byte in token.encode("utf-8"):
        value = ((value ^ byte) * 0x100000001B3) & MASK64
    return value


def derive_seed(master: int, *tokens: int | str) -> int:
    """Derive a child seed from a master seed and a path of tokens.

    Each token is folded in as `state = mix64(state + GOLDEN_GAMMA + token)`.

    Args:
        master: The master seed
        tokens: Integers (e.g. sample id, repetition) or names (e.g. "split")

    Returns:
        A 64-bit child seed

    """
    state = master & MASK64
    for token in tokens:
        state = _mix64((state + GOLDEN_GAMMA + _token_value(token)) & MASK64)
    return _mix64((state + GOLDEN_GAMMA) & MASK64)


class SplitMix64:
    """SplitMix64 generator with a 64-bit state."""

    def __init__(self, seed: int) -> None:
        self.state = seed & MASK64

    def next_u64(self) -> int:
        """Return the next 64-bit output."""
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return _mix64(self.state)

    def uniform(self) -> float:
        """Return a float in [0, 1) built from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randbelow(self, n: int) -> int:
        """Return an unbiased integer in [0, n) by rejection sampling."""
        if n <= 0:
            raise ValueError("randbelow requires n > 0")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            value = self.next_u64()
            if value < limit:
                return value % n

    def sample_indices(self, n: int, k: int) -> list[int]:
        """Pick k distinct indices from range(n), in selection order.

        Partial Fisher-Yates: position i swaps with a uniform position in [i, n).
        """
        if not 0 <= k <= n:
            raise ValueError(f"cannot sample {k} of {n} without replacement")
        pool = list(range(n))
        for i in range(k):
            j = i + self.randbelow(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def choice(self, values: list[int]) -> int:
        """Pick one element uniformly."""
        return values[self.randbelow(len(values))]


def numpy_generator(seed: int) -> np.random.Generator:
    """Numpy generator for bulk draws, seeded from a derived 64-bit seed."""
    return np.random.Generator(np.random.PCG64(seed & MASK64))
