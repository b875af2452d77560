"""Bucketed key-row search producing an (alpha, eps)-cover of the row weights.

Rows are hashed pairwise-independently into tau buckets and a key-row search
runs per bucket; an alpha-heavy row is likely alone-and-dominant in its
bucket, where it is a key row and gets found and weighed.  The returned
cover lists (row, weight) pairs: every listed weight is (1 +/- eps)-accurate
and every alpha-heavy row is listed, each except with small probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hadamard import RCalibration, thresholds
from .hashing import BucketHash, derive_seed
from .keyrow import KeyRowBank, KeyRowConfig

# Practical-mode caps: buckets beyond ~64 per heavy row stop paying for
# collision avoidance, and cascade levels cap out regardless of alpha.
PRACTICAL_BUCKET_FACTOR = 64
PRACTICAL_BUCKET_CAP = 256


def faithful_bucket_count(n: int, alpha: float, eps: float,
                          r_fn: RCalibration | None = None) -> int:
    """tau = ceil(4 * rho * log2(n) / alpha**2), the analysis's bucket count."""
    rho, _ = thresholds(n, eps, r_fn or RCalibration())
    return math.ceil(4.0 * rho * math.log2(max(2, n)) / alpha**2)


@dataclass(frozen=True)
class HeavyRowsConfig:
    """Knobs for one cover computation: bucketing plus the per-bucket search.

    repetitions > 1 runs that many independent bucketings and unions the
    covers (first finder's weight wins).  A row pair escaping the cover
    requires a bucket collision in every repetition, which tames the
    collision failure mode at desk-scale bucket counts without touching the
    per-instance guarantees.
    """

    alpha: float
    tau_buckets: int
    rho: float
    keyrow: KeyRowConfig
    seed: int = 0
    repetitions: int = 1

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.tau_buckets < 1:
            raise ValueError(f"bucket count must be >= 1, got {self.tau_buckets}")
        if self.repetitions < 1:
            raise ValueError(f"repetitions must be >= 1, got {self.repetitions}")

    @classmethod
    def faithful(cls, n: int, alpha: float, eps: float, seed: int,
                 r_fn: RCalibration | None = None) -> "HeavyRowsConfig":
        r_fn = r_fn or RCalibration()
        rho, _ = thresholds(n, eps, r_fn)
        return cls(
            alpha=alpha,
            tau_buckets=faithful_bucket_count(n, alpha, eps, r_fn),
            rho=rho,
            keyrow=KeyRowConfig.faithful(n, eps, derive_seed(seed, "keyrow"), r_fn),
            seed=seed,
        )

    @classmethod
    def practical(cls, n: int, alpha: float, eps: float, seed: int, *,
                  bucket_cap: int | None = None,
                  rho: float = 64.0,
                  repetitions: int = 1,
                  **keyrow_overrides) -> "HeavyRowsConfig":
        tau = min(
            faithful_bucket_count(n, alpha, eps),
            PRACTICAL_BUCKET_FACTOR * math.ceil(1.0 / alpha),
        )
        if bucket_cap is not None:
            tau = min(tau, bucket_cap)
        return cls(
            alpha=alpha,
            tau_buckets=max(1, tau),
            rho=rho,
            keyrow=KeyRowConfig.practical(n, eps, derive_seed(seed, "keyrow"),
                                          **keyrow_overrides),
            seed=seed,
            repetitions=repetitions,
        )


@dataclass
class Cover:
    """A set of (row, weight) pairs with distinct 1-based rows."""

    pairs: list[tuple[int, float]]

    def __post_init__(self):
        rows = [i for i, _ in self.pairs]
        if len(set(rows)) != len(rows):
            raise ValueError("cover rows must be distinct")
        if any(i < 1 for i in rows):
            raise ValueError("cover rows must be >= 1")
        if any(w < 0 for _, w in self.pairs):
            raise ValueError("cover weights must be >= 0")

    def indices(self) -> set[int]:
        return {i for i, _ in self.pairs}

    def weight_of(self, i: int) -> float:
        for row, w in self.pairs:
            if row == i:
                return w
        raise KeyError(i)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


def cover_check(cover: Cover, weights: np.ndarray, alpha: float, eps: float) -> bool:
    """True iff the cover is valid against the exact weight vector.

    Clause 1: every listed weight is within (1 +/- eps) of the true weight.
    Clause 2: every alpha-heavy row is listed.
    """
    weights = np.asarray(weights, dtype=np.float64)
    total = float(weights.sum())
    for i, w in cover:
        true = float(weights[i - 1])
        if not ((1.0 - eps) * true <= w <= (1.0 + eps) * true):
            return False
    listed = cover.indices()
    heavy = np.flatnonzero(weights > alpha * total) + 1
    return all(int(i) in listed for i in heavy)


def exact_cover(weights: np.ndarray, alpha: float) -> Cover:
    """The oracle cover: exactly the alpha-heavy rows with exact weights."""
    weights = np.asarray(weights, dtype=np.float64)
    total = float(weights.sum())
    rows = np.flatnonzero(weights > alpha * total)
    return Cover([(int(i) + 1, float(weights[i])) for i in rows])


class HeavyRowsSketch:
    """Streaming cover computation: bucket hashes plus banks of key-row searches.

    row_mask optionally restricts the search to a subset of rows (the cascade
    levels use this); excluded rows belong to no bucket but their events still
    feed the mask-independent column accumulators, as the masked-matrix
    semantics require.
    """

    def __init__(self, n: int, cfg: HeavyRowsConfig,
                 row_mask: np.ndarray | None = None):
        import dataclasses

        self.n = n
        self.cfg = cfg
        self.bucket_hashes = [
            BucketHash(derive_seed(cfg.seed, "buckets", r), n, cfg.tau_buckets)
            for r in range(cfg.repetitions)
        ]
        self.banks = []
        for r, bucket_hash in enumerate(self.bucket_hashes):
            assignment = bucket_hash.values().astype(np.int64) - 1
            if row_mask is not None:
                assignment = np.where(np.asarray(row_mask, dtype=bool),
                                      assignment, -1)
            keyrow_cfg = dataclasses.replace(
                cfg.keyrow, seed=derive_seed(cfg.seed, "keyrow-rep", r))
            self.banks.append(KeyRowBank(n, assignment, keyrow_cfg))

    @property
    def bank(self) -> KeyRowBank:
        return self.banks[0]

    def update_from_counts(self, joint, f_row, f_col, count) -> None:
        for bank in self.banks:
            bank.update_from_counts(joint, f_row, f_col, count)

    def ingest_batch(self, i_arr, j_arr) -> None:
        from .stream import batch_counts
        self.update_from_counts(*batch_counts(self.n, i_arr, j_arr))

    def finalize(self) -> tuple[Cover, dict]:
        pairs: list[tuple[int, float]] = []
        seen: set[int] = set()
        abst = []
        for bank in self.banks:
            outcomes, diags = bank.finalize()
            for outcome in outcomes:
                if outcome.is_found and outcome.index not in seen:
                    seen.add(outcome.index)
                    pairs.append(outcome.as_pair())
            abst.extend(d["abstentions"] / d["iterations"] for d in diags)
        diag = {
            "buckets": self.cfg.tau_buckets,
            "repetitions": self.cfg.repetitions,
            "cover_size": len(pairs),
            "mean_abstention": float(np.mean(abst)) if abst else 1.0,
        }
        return Cover(sorted(pairs)), diag

    def space_bytes(self) -> int:
        return sum(bank.space_bytes() for bank in self.banks)


def find_heavy_rows(i_arr, j_arr, n: int, alpha: float,
                    cfg: HeavyRowsConfig) -> Cover:
    """One-shot cover computation over stream arrays."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    sketch = HeavyRowsSketch(n, cfg)
    sketch.ingest_batch(i_arr, j_arr)
    cover, _ = sketch.finalize()
    return cover
