"""Pairwise-independent hashing of symbols into a fixed number of buckets.

The family is the classic Carter-Wegman construction over the Mersenne
prime p = 2^61 - 1:

    h(x) = ((a * x + b) mod p) mod J,   a in [1, p),  b in [0, p).

For two fixed distinct 64-bit keys and random (a, b), the pair of bucket
values is uniform over J^2 up to an O(J/p) bias from the final mod-J
reduction; with J well below 2^20 the bias is under 2^-40 and is ignored.

Every key is first reduced to 64 bits by a fixed, seedless mixer: strings
and bytes through FNV-1a plus the splitmix64 finalizer, integers through
the finalizer alone.  The mixer is not part of the random family; it is a
fixed bijection on 64-bit values, so the pairwise-independence guarantee
is untouched.  Scrambling integer keys matters in practice: consecutive
ids fed raw into a*x+b land on a lattice, which is harmless for any one
pair of keys but makes the joint bucket occupancy of a large key set far
from what independent uniform assignment would give.  A ``HashFunction``
is immutable and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MERSENNE_P = (1 << 61) - 1
_MASK64 = (1 << 64) - 1

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def mix64(z: int) -> int:
    """splitmix64 finalizer: a fixed bijective scramble of 64-bit values."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def splitmix64_stream(seed: int, count: int) -> list[int]:
    """Expand one 64-bit seed into ``count`` decorrelated 64-bit values."""
    out = []
    state = seed & _MASK64
    for _ in range(count):
        state = (state + 0x9E3779B97F4A7C15) & _MASK64
        out.append(mix64(state))
    return out


def key_to_u64(key) -> int:
    """Reduce a symbol to the 64-bit integer domain of the hash family.

    Integers are taken mod 2^64 and scrambled; strings and bytes are
    digested by FNV-1a and then scrambled, so nearby keys of any type do
    not land in nearby integers.
    """
    if isinstance(key, (int, np.integer)):
        return mix64(int(key) & _MASK64)
    if isinstance(key, str):
        return mix64(_fnv1a64(key.encode("utf-8")))
    if isinstance(key, (bytes, bytearray)):
        return mix64(_fnv1a64(bytes(key)))
    raise TypeError(f"unsupported key type: {type(key).__name__}")


@dataclass(frozen=True)
class HashFunction:
    """One member of the pairwise-independent family, fixed by two seeds."""

    seed_a: int
    seed_b: int
    width: int

    def __post_init__(self):
        if not 1 <= self.seed_a < MERSENNE_P:
            raise ValueError(f"seed_a must be in [1, p), got {self.seed_a}")
        if not 0 <= self.seed_b < MERSENNE_P:
            raise ValueError(f"seed_b must be in [0, p), got {self.seed_b}")
        if self.width < 1:
            raise ValueError(f"width must be >= 1, got {self.width}")

    def bucket_of(self, key) -> int:
        """Bucket index in {0, ..., width-1}; a pure function of (seeds, key)."""
        x = key_to_u64(key)
        return ((self.seed_a * x + self.seed_b) % MERSENNE_P) % self.width

    def buckets_of(self, keys) -> np.ndarray:
        """Vectorized ``bucket_of`` over an iterable of keys."""
        a, b, j = self.seed_a, self.seed_b, self.width
        if isinstance(keys, np.ndarray) and keys.dtype.kind in "iu":
            keys = keys.tolist()
        vals = [((a * key_to_u64(k) + b) % MERSENNE_P) % j for k in keys]
        return np.asarray(vals, dtype=np.int64)


def draw_hash(rng: np.random.Generator, width: int) -> HashFunction:
    """Draw a random member of the width-J family.

    The multiplier a is uniform on [1, p) and the offset b on [0, p), which
    is what gives two distinct keys a uniform joint bucket distribution.
    """
    if width < 1:
        raise ValueError(f"width must be >= 1, got {width}")
    a = 1 + int(rng.integers(0, MERSENNE_P - 1))
    b = int(rng.integers(0, MERSENNE_P))
    return HashFunction(seed_a=a, seed_b=b, width=width)
