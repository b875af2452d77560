"""Recursive subsampling combiner: per-level covers into a full-norm estimate.

phi = ceil(log2 n) pairwise-independent 0/1 masks nest the rows into levels
(level j keeps rows passing masks 1..j).  Level phi's few survivors get
their weights computed exactly; each coarser level j is then reconstructed
as Y_j = 2*Y_{j+1} - sum over its cover of (2*h - 1)*w, where h is the
level-(j+1) mask bit of the covered row.  The correction makes every
covered row contribute its listed weight deterministically (2*h*w from the
doubled term minus (2*h-1)*w is w for either h), while uncovered rows stay
unbiased through E[2*h] = 1; only rows light enough to escape their level's
cover add variance.

Level sketches estimate the original matrix restricted to the surviving
rows, so the column accumulators aggregate the full stream and the level
masks enter through the row side only; the level-j "substream" phrasing is
realized as row-mask composition, not event filtering.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .hadamard import HadamardFunction
from .hashing import BitHash, derive_seed
from .heavyrows import Cover, HeavyRowsConfig, HeavyRowsSketch, exact_cover
from .stream import batch_counts

FAITHFUL_F0_CAP = 10**10
PRACTICAL_F0_CAP = 4096


@dataclass
class FinalEstimate:
    """Y values per level (index j holds Y_j), the result Y_0, diagnostics."""

    levels: np.ndarray
    result: float
    diagnostics: dict = field(default_factory=dict)


def combine_levels(y_base: float, covers: list[Cover],
                   next_mask_bits: np.ndarray) -> np.ndarray:
    """Run the doubling recurrence from exact base to level 0.

    covers[j] is the level-j cover; next_mask_bits[j] holds the bits of the
    mask separating level j from level j+1 (the only hash choice under which
    covered rows cancel deterministically).  Returns Y as an array indexed by
    level, Y[phi] = y_base.
    """
    phi = len(covers)
    y = np.zeros(phi + 1)
    y[phi] = y_base
    for j in reversed(range(phi)):
        bits = next_mask_bits[j]
        corr = sum((2.0 * float(bits[i - 1]) - 1.0) * w for i, w in covers[j])
        y[j] = 2.0 * y[j + 1] - corr
    return y


def estimate_with_exact_covers(weights: np.ndarray, mask_bits: np.ndarray,
                               alpha: float) -> float:
    """The combiner run against oracle covers: isolates it from sketch noise.

    weights is the exact row-weight vector; mask_bits is the (phi, n) matrix
    of level-mask bits.  Survivor weights at the deepest level are summed
    exactly and every level cover lists its alpha-heavy rows exactly.
    """
    weights = np.asarray(weights, dtype=np.float64)
    phi = mask_bits.shape[0]
    alive = np.ones(weights.size, dtype=np.float64)
    covers = []
    for j in range(phi):
        covers.append(exact_cover(weights * alive, alpha))
        alive = alive * mask_bits[j]
    y_base = float(np.sum(weights * alive))
    return float(combine_levels(y_base, covers, mask_bits)[0])


class RecursiveSumState:
    """The streaming cascade: phi level masks, a cover sketch per level, an
    exact counter for rows surviving every mask."""

    def __init__(self, n: int, eps: float, seed: int, *,
                 g: HadamardFunction | None = None,
                 regime: str = "practical",
                 f0_cap: int | None = None,
                 bucket_cap: int | None = None,
                 keyrow_overrides: dict | None = None):
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        if not 0.0 < eps < 1.0:
            raise ValueError(f"eps must be in (0, 1), got {eps}")
        if regime not in ("practical", "faithful"):
            raise ValueError(f"unknown regime {regime!r}")
        self.n = n
        self.eps = eps
        self.seed = seed
        self.g = g or HadamardFunction.l1()
        self.regime = regime
        self.phi = max(1, math.ceil(math.log2(n)) if n > 1 else 1)
        self.f0_cap = f0_cap if f0_cap is not None else (
            FAITHFUL_F0_CAP if regime == "faithful" else PRACTICAL_F0_CAP)

        self.masks = [BitHash(derive_seed(seed, "level-mask", j), n)
                      for j in range(self.phi)]
        self.mask_bits = np.stack([h.values() for h in self.masks])
        alive = np.ones(n, dtype=np.uint8)
        self.level_alive = [alive.copy()]
        for j in range(self.phi):
            alive = alive & self.mask_bits[j]
            self.level_alive.append(alive.copy())

        self.alpha = eps**2 / self.phi**3
        self.delta = 1.0 / self.phi
        self.level_sketches: list[HeavyRowsSketch] = []
        for j in range(self.phi):
            if regime == "faithful":
                cfg = HeavyRowsConfig.faithful(n, self.alpha, eps,
                                               derive_seed(seed, "hh", j))
            else:
                cfg = HeavyRowsConfig.practical(
                    n, self.alpha, eps, derive_seed(seed, "hh", j),
                    bucket_cap=bucket_cap if bucket_cap is not None else 256,
                    repetitions=2,
                    **(keyrow_overrides or {}))
            self.level_sketches.append(
                HeavyRowsSketch(n, cfg, row_mask=self.level_alive[j]))

        self._base_alive = self.level_alive[self.phi].astype(bool)
        self._base_rows: dict[int, np.ndarray] = {}
        self._overflow = False
        self.f_col = np.zeros(n, dtype=np.int64)
        self.m_seen = 0

    def ingest(self, event) -> None:
        i, j = event
        self.ingest_batch(np.array([i], dtype=np.int64),
                          np.array([j], dtype=np.int64))

    def ingest_batch(self, i_arr, j_arr) -> None:
        i_arr = np.asarray(i_arr, dtype=np.int64)
        j_arr = np.asarray(j_arr, dtype=np.int64)
        joint, f_row, f_col, count = batch_counts(self.n, i_arr, j_arr)
        for sketch in self.level_sketches:
            sketch.update_from_counts(joint, f_row, f_col, count)
        self.f_col += f_col.astype(np.int64)
        self.m_seen += count

        sel = self._base_alive[i_arr - 1]
        if not sel.any():
            return
        bi, bj = i_arr[sel], j_arr[sel]
        for row in np.unique(bi):
            if self._overflow:
                return
            counts = self._base_rows.get(int(row))
            if counts is None:
                if len(self._base_rows) >= self.f0_cap:
                    self._overflow = True
                    self._base_rows.clear()
                    return
                counts = np.zeros(self.n, dtype=np.int64)
                self._base_rows[int(row)] = counts
            counts += np.bincount(bj[bi == row] - 1, minlength=self.n)

    def _base_weights(self) -> dict[int, float]:
        m = float(self.m_seen)
        col = self.f_col.astype(np.float64)
        out = {}
        for row, counts in self._base_rows.items():
            f_i = float(counts.sum())
            cells = counts / m - f_i * col / m**2
            out[row] = float(np.sum(self.g(cells)))
        return out

    def estimate(self, threads: int = 1) -> FinalEstimate:
        levels = np.zeros(self.phi + 1)
        diag: dict = {"phi": self.phi, "alpha": self.alpha,
                      "f0_cap": self.f0_cap, "levels": []}
        if self.m_seen == 0:
            return FinalEstimate(levels, 0.0, diag)

        base = self._base_weights()
        f0 = sum(1 for w in base.values() if w > 0.0)
        diag["f0"] = f0
        if self._overflow or f0 > self.f0_cap:
            diag["capped"] = True
            return FinalEstimate(levels, 0.0, diag)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                finals = list(pool.map(lambda s: s.finalize(), self.level_sketches))
        else:
            finals = [s.finalize() for s in self.level_sketches]
        covers = [cover for cover, _ in finals]
        for j, (_, d) in enumerate(finals):
            diag["levels"].append({"level": j, **d})

        y_base = float(sum(base.values()))
        levels = combine_levels(y_base, covers, self.mask_bits)
        return FinalEstimate(levels, float(levels[0]), diag)

    def space_bytes(self) -> int:
        """Accumulators across every level plus the exact-base state."""
        total = sum(s.space_bytes() for s in self.level_sketches)
        total += self.f_col.nbytes + 8
        total += sum(c.nbytes for c in self._base_rows.values())
        return total
