"""The two linear Cauchy-sketch blackboxes over the implicit pair-stream matrix.

Both sketches keep a handful of accumulators per repetition; coefficients are
pseudorandom functions of (seed, repetition, index) and are never part of the
sketch state proper (serialization and space accounting cover accumulators
and counters only; the in-memory coefficient matrices are a recomputable
cache).  The 1/m and 1/m**2 normalizations are applied at query time, which
is what makes the accumulators linear under stream concatenation and merge.

StableL1VectorSketch estimates the L1 norm of the column-aggregate vector of
the mask-selected rows to (1 +/- eps') via the 1-stability of the Cauchy
distribution: each repetition's query value is exactly Cauchy with scale
equal to the target norm, and the median of absolute values estimates it.

IMMatrixSketch estimates the entrywise L1 norm of the mask-selected rows to
a multiplicative factor r(n) using independent row and column Cauchy
coefficients (the bilinear form is heavy-tailed in both directions, hence
the weaker guarantee).
"""

from __future__ import annotations

import struct

import numpy as np

from .hadamard import HadamardFunction, aggregate_norm, matrix_norm
from .hashing import BitHash, derive_seed, _uniforms

# Rep-count floor constants: k >= C1 * log(1/delta1) / eps'**2 for the vector
# sketch, k >= C2 * log(1/delta2) for the matrix sketch.
C1_REPS = 16.0
C2_REPS = 64.0

DEFAULT_TRUNCATION = 1e6

_MAGIC_BA1 = b"ISK1"
_MAGIC_BA2 = b"ISK2"
_VERSION = 1


class ConfigurationError(ValueError):
    """A sketch was configured below the floor its guarantee requires."""


def cauchy_coefficients(seed: int, count: int, truncation: float | None = None) -> np.ndarray:
    """Standard Cauchy variates derived from (seed, index) by inverse CDF."""
    u = _uniforms(seed, count)
    c = np.tan(np.pi * (u - 0.5))
    if truncation is not None:
        np.clip(c, -truncation, truncation, out=c)
    return c


def _mask_descriptor(mask) -> tuple[int, int]:
    if mask is None:
        return 0, 0
    if isinstance(mask, BitHash) and mask.kind == "ones" and not mask.inverted:
        return 1, 0
    if isinstance(mask, BitHash) and mask.kind == "poly" and not mask.inverted:
        return 2, mask.seed
    raise ValueError("only plain or all-ones masks can be serialized")


def _mask_from_descriptor(kind: int, seed: int, n: int):
    if kind == 0:
        return None
    if kind == 1:
        return BitHash.ones(n)
    return BitHash(seed, n)


class StableL1VectorSketch:
    """Streaming (1 +/- eps')-estimator of ||column aggregate of masked rows||_1."""

    def __init__(self, n: int, k: int, seed: int, mask, *,
                 eps_prime: float | None = None, delta1: float | None = None):
        if n < 1:
            raise ValueError(f"domain size must be >= 1, got {n}")
        if k < 1:
            raise ValueError(f"repetition count must be >= 1, got {k}")
        if eps_prime is not None and delta1 is not None:
            floor = C1_REPS * np.log(1.0 / delta1) / eps_prime**2
            if k < floor:
                raise ConfigurationError(
                    f"k={k} below floor {floor:.0f} for eps'={eps_prime}, delta1={delta1}")
        if mask is not None and mask.n != n:
            raise ValueError(f"mask domain {mask.n} != {n}")
        self.n = n
        self.k = k
        self.seed = seed
        self.mask = mask
        self.eps_prime = eps_prime
        self.m_seen = 0
        self.f_s = 0
        self.a1 = np.zeros(k, dtype=np.float64)
        self.a2 = np.zeros(k, dtype=np.float64)
        self._coeffs: np.ndarray | None = None
        self._mask_values: np.ndarray | None = None

    def column_coefficients(self) -> np.ndarray:
        """The (k, n) Cauchy coefficient matrix, derived on demand from the seed."""
        if self._coeffs is None:
            self._coeffs = np.stack([
                cauchy_coefficients(derive_seed(self.seed, "ba1-col", t), self.n)
                for t in range(self.k)
            ])
        return self._coeffs

    def _mask_vals(self) -> np.ndarray:
        if self._mask_values is None:
            if self.mask is None:
                raise ValueError("sketch has no mask attached; cannot ingest")
            self._mask_values = self.mask.values().astype(np.float64)
        return self._mask_values

    def ingest(self, event) -> None:
        i, j = event
        if not (1 <= i <= self.n and 1 <= j <= self.n):
            raise ValueError(f"event ({i}, {j}) outside [1, {self.n}]^2")
        c = self.column_coefficients()[:, j - 1]
        sel = int(self._mask_vals()[i - 1])
        if sel:
            self.a1 += c
            self.f_s += 1
        self.a2 += c
        self.m_seen += 1

    def ingest_batch(self, i_arr, j_arr) -> None:
        from .stream import batch_counts
        joint, f_row, f_col, count = batch_counts(self.n, i_arr, j_arr)
        self.update_from_counts(joint, f_row, f_col, count)

    def update_from_counts(self, joint, f_row, f_col, count) -> None:
        """Apply a pre-aggregated batch: joint counts plus marginal counts."""
        coeffs = self.column_coefficients()
        mv = self._mask_vals()
        self.a1 += mv @ (joint @ coeffs.T)
        self.a2 += coeffs @ f_col
        self.f_s += int(round(float(mv @ f_row)))
        self.m_seen += int(count)

    def per_rep_values(self) -> np.ndarray:
        """One value per repetition; each is exactly Cauchy(target norm)."""
        if self.m_seen < 1:
            raise ValueError("estimate undefined on an empty stream")
        m = float(self.m_seen)
        return self.a1 / m - self.f_s * self.a2 / m**2

    def estimate(self) -> float:
        return float(np.median(np.abs(self.per_rep_values())))

    def merge(self, other: "StableL1VectorSketch") -> "StableL1VectorSketch":
        if (self.n, self.k, self.seed) != (other.n, other.k, other.seed):
            raise ValueError("can only merge sketches with identical (n, k, seed)")
        out = StableL1VectorSketch(self.n, self.k, self.seed, self.mask or other.mask)
        out.a1 = self.a1 + other.a1
        out.a2 = self.a2 + other.a2
        out.f_s = self.f_s + other.f_s
        out.m_seen = self.m_seen + other.m_seen
        return out

    def space_bytes(self) -> int:
        """Accumulator footprint: a1, a2 plus the two counters."""
        return self.a1.nbytes + self.a2.nbytes + 16

    def to_bytes(self) -> bytes:
        kind, mseed = _mask_descriptor(self.mask)
        head = struct.pack("<4sIQQQQQBQ", _MAGIC_BA1, _VERSION, self.n, self.k,
                           self.seed, self.m_seen, self.f_s, kind, mseed)
        return head + self.a1.tobytes() + self.a2.tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "StableL1VectorSketch":
        head_size = struct.calcsize("<4sIQQQQQBQ")
        magic, version, n, k, seed, m_seen, f_s, kind, mseed = struct.unpack(
            "<4sIQQQQQBQ", blob[:head_size])
        if magic != _MAGIC_BA1:
            raise ValueError("not a vector-sketch blob")
        if version != _VERSION:
            raise ValueError(f"unsupported version {version}")
        out = cls(n, k, seed, _mask_from_descriptor(kind, mseed, n))
        out.m_seen = m_seen
        out.f_s = f_s
        floats = np.frombuffer(blob[head_size:], dtype=np.float64)
        out.a1 = floats[:k].copy()
        out.a2 = floats[k:2 * k].copy()
        return out


class IMMatrixSketch:
    """Streaming r(n)-factor estimator of the masked rows' entrywise L1 norm."""

    def __init__(self, n: int, k: int, seed: int, mask, *,
                 truncation: float = DEFAULT_TRUNCATION,
                 delta2: float | None = None, r_fn=None):
        if n < 1:
            raise ValueError(f"domain size must be >= 1, got {n}")
        if k < 1:
            raise ValueError(f"repetition count must be >= 1, got {k}")
        if delta2 is not None:
            floor = C2_REPS * np.log(1.0 / delta2)
            if k < floor:
                raise ConfigurationError(
                    f"k={k} below floor {floor:.0f} for delta2={delta2}")
        if mask is not None and mask.n != n:
            raise ValueError(f"mask domain {mask.n} != {n}")
        self.n = n
        self.k = k
        self.seed = seed
        self.mask = mask
        self.truncation = truncation
        self.r_fn = r_fn
        self.m_seen = 0
        self.b1 = np.zeros(k, dtype=np.float64)
        self.b2 = np.zeros(k, dtype=np.float64)
        self.b3 = np.zeros(k, dtype=np.float64)
        self._rows: np.ndarray | None = None
        self._cols: np.ndarray | None = None
        self._mask_values: np.ndarray | None = None

    def row_coefficients(self) -> np.ndarray:
        if self._rows is None:
            self._rows = np.stack([
                cauchy_coefficients(derive_seed(self.seed, "ba2-row", t),
                                    self.n, self.truncation)
                for t in range(self.k)
            ])
        return self._rows

    def column_coefficients(self) -> np.ndarray:
        if self._cols is None:
            self._cols = np.stack([
                cauchy_coefficients(derive_seed(self.seed, "ba2-col", t),
                                    self.n, self.truncation)
                for t in range(self.k)
            ])
        return self._cols

    def _mask_vals(self) -> np.ndarray:
        if self._mask_values is None:
            if self.mask is None:
                raise ValueError("sketch has no mask attached; cannot ingest")
            self._mask_values = self.mask.values().astype(np.float64)
        return self._mask_values

    def ingest(self, event) -> None:
        i, j = event
        if not (1 <= i <= self.n and 1 <= j <= self.n):
            raise ValueError(f"event ({i}, {j}) outside [1, {self.n}]^2")
        x = self.row_coefficients()[:, i - 1]
        y = self.column_coefficients()[:, j - 1]
        if self._mask_vals()[i - 1]:
            self.b1 += x * y
            self.b2 += x
        self.b3 += y
        self.m_seen += 1

    def ingest_batch(self, i_arr, j_arr) -> None:
        from .stream import batch_counts
        joint, f_row, f_col, count = batch_counts(self.n, i_arr, j_arr)
        self.update_from_counts(joint, f_row, f_col, count)

    def update_from_counts(self, joint, f_row, f_col, count) -> None:
        masked_x = self.row_coefficients() * self._mask_vals()
        cols = self.column_coefficients()
        # joint @ cols.T is (n, k); contract rows against the masked x's.
        self.b1 += np.einsum("ti,it->t", masked_x, joint @ cols.T)
        self.b2 += masked_x @ f_row
        self.b3 += cols @ f_col
        self.m_seen += int(count)

    def per_rep_values(self) -> np.ndarray:
        """One bilinear form per repetition: sum of x_i*y_j*a_ij over masked rows."""
        if self.m_seen < 1:
            raise ValueError("estimate undefined on an empty stream")
        m = float(self.m_seen)
        return self.b1 / m - self.b2 * self.b3 / m**2

    def estimate(self) -> float:
        return float(np.median(np.abs(self.per_rep_values())))

    def merge(self, other: "IMMatrixSketch") -> "IMMatrixSketch":
        if (self.n, self.k, self.seed) != (other.n, other.k, other.seed):
            raise ValueError("can only merge sketches with identical (n, k, seed)")
        out = IMMatrixSketch(self.n, self.k, self.seed, self.mask or other.mask,
                             truncation=self.truncation, r_fn=self.r_fn)
        out.b1 = self.b1 + other.b1
        out.b2 = self.b2 + other.b2
        out.b3 = self.b3 + other.b3
        out.m_seen = self.m_seen + other.m_seen
        return out

    def space_bytes(self) -> int:
        return self.b1.nbytes + self.b2.nbytes + self.b3.nbytes + 8

    def to_bytes(self) -> bytes:
        kind, mseed = _mask_descriptor(self.mask)
        head = struct.pack("<4sIQQQQdBQ", _MAGIC_BA2, _VERSION, self.n, self.k,
                           self.seed, self.m_seen, self.truncation, kind, mseed)
        return head + self.b1.tobytes() + self.b2.tobytes() + self.b3.tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "IMMatrixSketch":
        head_size = struct.calcsize("<4sIQQQQdBQ")
        magic, version, n, k, seed, m_seen, trunc, kind, mseed = struct.unpack(
            "<4sIQQQQdBQ", blob[:head_size])
        if magic != _MAGIC_BA2:
            raise ValueError("not a matrix-sketch blob")
        if version != _VERSION:
            raise ValueError(f"unsupported version {version}")
        out = cls(n, k, seed, _mask_from_descriptor(kind, mseed, n), truncation=trunc)
        out.m_seen = m_seen
        floats = np.frombuffer(blob[head_size:], dtype=np.float64)
        out.b1 = floats[:k].copy()
        out.b2 = floats[k:2 * k].copy()
        out.b3 = floats[2 * k:3 * k].copy()
        return out


class SimulatedBA1:
    """Noise-model stand-in for the vector blackbox, driven by an explicit matrix.

    Returns the exact aggregate norm times a factor in [1-eps', 1+eps'];
    with probability delta it returns an adversarial out-of-bracket value.
    Lets the reduction be exercised for any admissible g, including ones no
    real sketch exists for.
    """

    def __init__(self, matrix: np.ndarray, g: HadamardFunction,
                 eps_prime: float, delta: float, seed: int):
        if not 0.0 <= eps_prime < 1.0:
            raise ValueError(f"eps' must be in [0, 1), got {eps_prime}")
        if not 0.0 <= delta <= 1.0:
            raise ValueError(f"delta must be in [0, 1], got {delta}")
        self.matrix = matrix
        self.g = g
        self.eps_prime = eps_prime
        self.delta = delta
        self.rng = np.random.default_rng(seed)

    def __call__(self, mask) -> float:
        oracle = aggregate_norm(self.g, self.matrix, mask)
        if self.rng.random() < self.delta:
            if oracle == 0.0:
                return 1.0 + self.rng.random()
            return oracle * (1.0 + self.eps_prime + 0.5 + self.rng.random())
        return oracle * self.rng.uniform(1.0 - self.eps_prime, 1.0 + self.eps_prime)


class SimulatedBA2:
    """Noise-model stand-in for the matrix blackbox (factor in [1/r, r])."""

    def __init__(self, matrix: np.ndarray, g: HadamardFunction,
                 r: float, delta: float, seed: int):
        if r < 1.0:
            raise ValueError(f"r must be >= 1, got {r}")
        if not 0.0 <= delta <= 1.0:
            raise ValueError(f"delta must be in [0, 1], got {delta}")
        self.matrix = matrix
        self.g = g
        self.r = r
        self.delta = delta
        self.rng = np.random.default_rng(seed)

    def __call__(self, mask) -> float:
        mv = mask.values().astype(np.float64)
        oracle = matrix_norm(self.g, self.matrix * mv[:, None])
        if self.rng.random() < self.delta:
            if oracle == 0.0:
                return 1.0 + self.rng.random()
            side = 1.0 if self.rng.random() < 0.5 else -1.0
            return oracle * self.r ** (side * (1.5 + self.rng.random()))
        if self.r == 1.0:
            return oracle
        return oracle * self.r ** self.rng.uniform(-1.0, 1.0)


def sim_ba1(matrix, g, mask, eps_prime, delta1, seed) -> float:
    """Single draw of the simulated vector blackbox."""
    return SimulatedBA1(matrix, g, eps_prime, delta1, seed)(mask)


def sim_ba2(matrix, g, mask, r, delta2, seed) -> float:
    """Single draw of the simulated matrix blackbox."""
    return SimulatedBA2(matrix, g, r, delta2, seed)(mask)
