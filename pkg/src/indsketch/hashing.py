"""Seeded pairwise-independent hash families over the 1-based domain [n].

Everything here is derived on demand from 64-bit seeds: a hash object stores
its coefficients, never a table of values.  The base family is the degree-1
polynomial (a*x + b) mod PRIME with (a, b) drawn from the seed, reduced to
{0, 1} by the parity of the low bit and to [tau] by floor-scaling.  Both
reductions keep the family's pairwise independence up to a documented bias
of at most 2/PRIME per point pair.

Indices pass through a fixed 31-bit bijection before the polynomial.  A
degree-1 map evaluated at consecutive integers steps by the constant a, so
raw indices produce long constant-parity runs (an all-zero mask over a small
domain is a ~1% event, which starves downstream subsampling levels).  The
premix leaves every fixed-pair distribution, and hence pairwise
independence, exactly as the family provides it.
"""

from __future__ import annotations

import hashlib

import numpy as np

# Smallest prime above 2**31.  Premixed indices are below 2**31, so a*x + b
# fits in uint64 and numpy can evaluate in bulk.
PRIME = 2147483659

MASK64 = 0xFFFF_FFFF_FFFF_FFFF
_MASK31 = (1 << 31) - 1
_GOLDEN = 0x9E3779B97F4A7C15
MAX_DOMAIN = 2**31 - 1


def _premix31_array(x: np.ndarray) -> np.ndarray:
    """Fixed bijection on [0, 2**31): xorshift and odd-multiply rounds."""
    x = x.astype(np.uint64)
    x ^= x >> np.uint64(16)
    x = (x * np.uint64(0x45D9F3B)) & np.uint64(_MASK31)
    x ^= x >> np.uint64(13)
    x = (x * np.uint64(0x2C1B3C6D)) & np.uint64(_MASK31)
    x ^= x >> np.uint64(16)
    return x


def _premix31_int(x: int) -> int:
    x ^= x >> 16
    x = (x * 0x45D9F3B) & _MASK31
    x ^= x >> 13
    x = (x * 0x2C1B3C6D) & _MASK31
    x ^= x >> 16
    return x


def splitmix64(x: int) -> int:
    """One splitmix64 step: a cheap, high-quality 64-bit mixer."""
    z = (x + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def splitmix64_array(x: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64 over a uint64 array (wraps mod 2**64)."""
    z = (x + np.uint64(_GOLDEN)).astype(np.uint64)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def derive_seed(master: int, *parts: int | str) -> int:
    """Derive a child seed from a master seed and a label path.

    The same (master, parts) always yields the same child, and distinct
    paths decorrelate, so one experiment seed can drive any number of
    parallel hash functions and sketches reproducibly.
    """
    state = splitmix64(master & MASK64)
    for idx, part in enumerate(parts):
        if isinstance(part, str):
            digest = hashlib.blake2b(part.encode(), digest_size=8).digest()
            part = int.from_bytes(digest, "little")
        state = splitmix64(state ^ ((part & MASK64) + idx * _GOLDEN & MASK64))
    return state


def _uniforms(seed: int, count: int, offset: int = 0) -> np.ndarray:
    """count uniforms in the open interval (0, 1), derived from (seed, index)."""
    idx = np.arange(offset, offset + count, dtype=np.uint64)
    z = splitmix64_array(idx ^ np.uint64(seed & MASK64))
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


class BitHash:
    """A 0/1-valued hash over [n], closed under complement and entrywise product.

    kind "poly" is the seeded two-coefficient family; "ones" is the constant
    all-ones mask; "had" evaluates the entrywise product of its factors.  The
    ``inverted`` flag complements whatever the kind evaluates to.
    """

    __slots__ = ("seed", "n", "kind", "inverted", "factors", "_a", "_b")

    def __init__(self, seed: int = 0, n: int = 1, *, kind: str = "poly",
                 inverted: bool = False, factors: tuple = ()):
        if n < 1:
            raise ValueError(f"domain size must be >= 1, got {n}")
        if n > MAX_DOMAIN:
            raise ValueError(f"domain size {n} exceeds {MAX_DOMAIN}")
        self.seed = seed & MASK64
        self.n = n
        self.kind = kind
        self.inverted = inverted
        self.factors = factors
        if kind == "poly":
            self._a = splitmix64(derive_seed(self.seed, "bit-a")) % PRIME
            self._b = splitmix64(derive_seed(self.seed, "bit-b")) % PRIME
        else:
            self._a = self._b = 0

    @classmethod
    def ones(cls, n: int) -> "BitHash":
        """The constant mask selecting every row (its complement selects none)."""
        return cls(0, n, kind="ones")

    def values(self) -> np.ndarray:
        """Evaluate at every point of [n]; entry i-1 holds the value at i."""
        if self.kind == "poly":
            idx = _premix31_array(np.arange(1, self.n + 1, dtype=np.uint64))
            v = ((np.uint64(self._a) * idx + np.uint64(self._b)) % np.uint64(PRIME))
            out = (v & np.uint64(1)).astype(np.uint8)
        elif self.kind == "ones":
            out = np.ones(self.n, dtype=np.uint8)
        elif self.kind == "had":
            out = np.ones(self.n, dtype=np.uint8)
            for f in self.factors:
                out &= f.values()
        else:
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.inverted:
            out = (1 - out).astype(np.uint8)
        return out

    def __call__(self, i: int) -> int:
        if not 1 <= i <= self.n:
            raise ValueError(f"index {i} outside [1, {self.n}]")
        if self.kind == "poly":
            v = ((self._a * _premix31_int(i) + self._b) % PRIME) & 1
        elif self.kind == "ones":
            v = 1
        else:
            v = 1
            for f in self.factors:
                v &= f(i)
        return (1 - v) if self.inverted else v

    def __repr__(self):
        return (f"BitHash(seed={self.seed}, n={self.n}, kind={self.kind!r}, "
                f"inverted={self.inverted})")


def new_bit_hash(seed: int, n: int) -> BitHash:
    """A pairwise-independent uniform hash [n] -> {0, 1}."""
    return BitHash(seed, n)


def complement(h) -> BitHash:
    """The mask with value 1 exactly where h is 0."""
    if isinstance(h, BitHash):
        out = BitHash.__new__(BitHash)
        out.seed = h.seed
        out.n = h.n
        out.kind = h.kind
        out.inverted = not h.inverted
        out.factors = h.factors
        out._a = h._a
        out._b = h._b
        return out
    return BitHash(0, h.n, kind="had", inverted=True, factors=(h,))


def had(a, b) -> BitHash:
    """Entrywise product: the result is 1 at i iff both a and b are 1 at i."""
    if a.n != b.n:
        raise ValueError(f"domain mismatch: {a.n} != {b.n}")
    return BitHash(0, a.n, kind="had", factors=(a, b))


class BucketHash:
    """A pairwise-independent hash [n] -> [tau] = {1, ..., tau}."""

    __slots__ = ("seed", "n", "tau", "_a", "_b")

    def __init__(self, seed: int, n: int, tau: int):
        if n < 1:
            raise ValueError(f"domain size must be >= 1, got {n}")
        if n > MAX_DOMAIN:
            raise ValueError(f"domain size {n} exceeds {MAX_DOMAIN}")
        if tau < 1:
            raise ValueError(f"bucket count must be >= 1, got {tau}")
        if tau > 2**20:
            raise ValueError(f"bucket count {tau} exceeds 2**20")
        self.seed = seed & MASK64
        self.n = n
        self.tau = tau
        self._a = splitmix64(derive_seed(self.seed, "bucket-a")) % PRIME
        self._b = splitmix64(derive_seed(self.seed, "bucket-b")) % PRIME

    def values(self) -> np.ndarray:
        """Bucket of every point of [n]; entry i-1 holds the bucket of i."""
        idx = _premix31_array(np.arange(1, self.n + 1, dtype=np.uint64))
        v = (np.uint64(self._a) * idx + np.uint64(self._b)) % np.uint64(PRIME)
        return ((v * np.uint64(self.tau)) // np.uint64(PRIME)).astype(np.int64) + 1

    def __call__(self, i: int) -> int:
        if not 1 <= i <= self.n:
            raise ValueError(f"index {i} outside [1, {self.n}]")
        v = (self._a * _premix31_int(i) + self._b) % PRIME
        return (v * self.tau) // PRIME + 1

    def indicator(self, k: int) -> "BucketIndicator":
        """The 0/1 view of bucket k: value 1 at i iff this hash maps i to k."""
        if not 1 <= k <= self.tau:
            raise ValueError(f"bucket {k} outside [1, {self.tau}]")
        return BucketIndicator(self, k)

    def __repr__(self):
        return f"BucketHash(seed={self.seed}, n={self.n}, tau={self.tau})"


def new_bucket_hash(seed: int, n: int, tau: int) -> BucketHash:
    return BucketHash(seed, n, tau)


class BucketIndicator:
    """BitHash-compatible view of a single bucket of a BucketHash."""

    __slots__ = ("base", "k", "n")

    def __init__(self, base: BucketHash, k: int):
        self.base = base
        self.k = k
        self.n = base.n

    def values(self) -> np.ndarray:
        return (self.base.values() == self.k).astype(np.uint8)

    def __call__(self, i: int) -> int:
        return 1 if self.base(i) == self.k else 0

    def __repr__(self):
        return f"BucketIndicator(bucket={self.k} of {self.base!r})"
