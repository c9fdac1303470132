"""Counter-based deterministic random generator.

Every draw is a pure function of ``(seed, counter)``, computed with 64-bit
integer arithmetic only, so identical seeds produce identical byte streams on
every platform and Python build. The mixing function and increment constant
are the widely published splitmix64 values:

    increment  0x9E3779B97F4A7C15
    multiplier 0xBF58476D1CE4E5B9
    multiplier 0x94D049BB133111EB

Operators that need several random quantities consume counters in a fixed,
documented order; a draw at counter ``i`` never depends on draws before it.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_INCREMENT = 0x9E3779B97F4A7C15
_MULT1 = 0xBF58476D1CE4E5B9
_MULT2 = 0x94D049BB133111EB

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def mix64(value: int) -> int:
    """splitmix64 finalizer: avalanche a 64-bit value."""
    z = value & _MASK64
    z = ((z ^ (z >> 30)) * _MULT1) & _MASK64
    z = ((z ^ (z >> 27)) * _MULT2) & _MASK64
    return z ^ (z >> 31)


def draw64(seed: int, counter: int) -> int:
    """The ``counter``-th 64-bit draw of the stream identified by ``seed``."""
    return mix64((seed + (counter + 1) * _INCREMENT) & _MASK64)


def fnv1a_64(text: str) -> int:
    """64-bit FNV-1a hash of UTF-8 encoded text."""
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def derive_seed(seed: int, *labels: object) -> int:
    """Derive an independent substream seed from a parent seed and labels.

    Used to give every corpus pair / scenario its own stream without the
    parent stream's counters interfering.
    """
    acc = seed & _MASK64
    for label in labels:
        acc = mix64(acc ^ fnv1a_64(str(label)))
    return acc


class CounterRng:
    """Sequential view over the counter-indexed stream for one seed."""

    def __init__(self, seed: int) -> None:
        self.seed = seed & _MASK64
        self.counter = 0

    def u64(self) -> int:
        value = draw64(self.seed, self.counter)
        self.counter += 1
        return value

    def below(self, n: int) -> int:
        """Integer in [0, n) via fixed-point multiply (no rejection loop)."""
        if n <= 0:
            raise ValueError("below() requires n >= 1")
        return (self.u64() * n) >> 64

    def unit(self) -> float:
        """Float in [0, 1) with 53 bits of precision."""
        return (self.u64() >> 11) * (2.0**-53)

    def sign(self) -> int:
        return 1 if self.below(2) == 0 else -1

    def choice(self, seq):
        if not seq:
            raise ValueError("choice() on empty sequence")
        return seq[self.below(len(seq))]

    def sample_indices(self, n: int, k: int) -> list[int]:
        """k distinct indices from range(n), in draw order (partial Fisher-Yates)."""
        if k > n:
            raise ValueError("sample larger than population")
        pool = list(range(n))
        picked: list[int] = []
        for i in range(k):
            j = i + self.below(n - i)
            pool[i], pool[j] = pool[j], pool[i]
            picked.append(pool[i])
        return picked

    def shuffled(self, seq) -> list:
        """Fisher-Yates shuffle, returned as a new list."""
        out = list(seq)
        for i in range(len(out) - 1, 0, -1):
            j = self.below(i + 1)
            out[i], out[j] = out[j], out[i]
        return out
