"""Pair-stream data model: exact frequency oracle and synthetic generators.

A stream is a sequence of pairs (i, j) with 1 <= i, j <= n.  Its exact
statistics define the implicit matrix a_ij = f_ij/m - f_i*f_j/m**2, whose
entrywise-g L1 norm is the distance between the joint and product
distributions.  The histogram here is the ground-truth oracle the sketching
path is verified against; it is not meant to be sublinear.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .hadamard import HadamardFunction

# The oracle materializes n x n rows at query time; keep it at desk scale.
ORACLE_MAX_N = 4096

GENERATOR_MODES = ("independent", "perfect_dependence", "mixture", "planted_rows")


class StreamEvent(NamedTuple):
    i: int
    j: int


class ExactHistogram:
    """Exact counts (f_i, f_j, f_ij, m) of a pair stream over [n] x [n]."""

    def __init__(self, n: int):
        if not 1 <= n <= ORACLE_MAX_N:
            raise ValueError(f"oracle domain must be in [1, {ORACLE_MAX_N}], got {n}")
        self.n = n
        self.m = 0
        self.f_row = np.zeros(n, dtype=np.int64)
        self.f_col = np.zeros(n, dtype=np.int64)
        self.f_joint: dict[tuple[int, int], int] = {}

    def ingest(self, event: StreamEvent | tuple[int, int]) -> None:
        i, j = event
        if not (1 <= i <= self.n and 1 <= j <= self.n):
            raise ValueError(f"event ({i}, {j}) outside [1, {self.n}]^2")
        self.m += 1
        self.f_row[i - 1] += 1
        self.f_col[j - 1] += 1
        self.f_joint[(i, j)] = self.f_joint.get((i, j), 0) + 1

    def ingest_batch(self, i_arr: np.ndarray, j_arr: np.ndarray) -> None:
        i_arr = np.asarray(i_arr, dtype=np.int64)
        j_arr = np.asarray(j_arr, dtype=np.int64)
        if i_arr.shape != j_arr.shape:
            raise ValueError("i and j arrays must have the same length")
        if i_arr.size == 0:
            return
        if i_arr.min() < 1 or i_arr.max() > self.n or j_arr.min() < 1 or j_arr.max() > self.n:
            raise ValueError(f"batch contains events outside [1, {self.n}]^2")
        self.m += int(i_arr.size)
        self.f_row += np.bincount(i_arr - 1, minlength=self.n)
        self.f_col += np.bincount(j_arr - 1, minlength=self.n)
        keys, counts = np.unique(i_arr * (self.n + 1) + j_arr, return_counts=True)
        for key, count in zip(keys.tolist(), counts.tolist()):
            pair = (key // (self.n + 1), key % (self.n + 1))
            self.f_joint[pair] = self.f_joint.get(pair, 0) + count

    def joint_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n), dtype=np.float64)
        for (i, j), c in self.f_joint.items():
            out[i - 1, j - 1] = c
        return out

    def view(self) -> "ImplicitMatrixView":
        return ImplicitMatrixView(self)


class ImplicitMatrixView:
    """Cell access to a_ij = f_ij/m - f_i*f_j/m**2 over an ExactHistogram."""

    def __init__(self, hist: ExactHistogram):
        if hist.m < 1:
            raise ValueError("distribution undefined for an empty stream")
        self.hist = hist
        self.n = hist.n

    def cell(self, i: int, j: int) -> float:
        h = self.hist
        f_ij = h.f_joint.get((i, j), 0)
        return f_ij / h.m - h.f_row[i - 1] * h.f_col[j - 1] / h.m**2

    def dense(self) -> np.ndarray:
        h = self.hist
        return h.joint_dense() / h.m - np.outer(h.f_row, h.f_col).astype(np.float64) / h.m**2

    def row_weights(self, g: HadamardFunction) -> np.ndarray:
        """Exact per-row sums of g over the implicit matrix."""
        h = self.hist
        out = np.empty(h.n, dtype=np.float64)
        prod_row = h.f_col.astype(np.float64) / h.m**2
        joint_by_row: dict[int, list[tuple[int, int]]] = {}
        for (i, j), c in h.f_joint.items():
            joint_by_row.setdefault(i, []).append((j, c))
        row = np.empty(h.n, dtype=np.float64)
        for i in range(1, h.n + 1):
            np.multiply(prod_row, -float(h.f_row[i - 1]), out=row)
            for j, c in joint_by_row.get(i, ()):
                row[j - 1] += c / h.m
            out[i - 1] = float(np.sum(g(row)))
        return out


def exact_distance(hist: ExactHistogram, g: HadamardFunction) -> float:
    """The exact entrywise-g L1 norm of the implicit matrix; in [0, 2] for g=|x|."""
    return float(np.sum(hist.view().row_weights(g)))


def masked_cell_weight(view: ImplicitMatrixView, g: HadamardFunction, mask) -> float:
    """Exact sum of g over the cells of mask-selected rows."""
    if mask.n != view.n:
        raise ValueError(f"mask domain {mask.n} != matrix rows {view.n}")
    return float(view.row_weights(g) @ mask.values().astype(np.float64))


def batch_counts(n: int, i_arr: np.ndarray, j_arr: np.ndarray,
                 dense_threshold: int = 512):
    """Aggregate a batch of events into (joint, f_row, f_col, count).

    The joint matrix is dense below the threshold and CSR above it; both
    support the matrix products the sketch update paths use.
    """
    i_arr = np.asarray(i_arr, dtype=np.int64)
    j_arr = np.asarray(j_arr, dtype=np.int64)
    if i_arr.size and (i_arr.min() < 1 or i_arr.max() > n
                       or j_arr.min() < 1 or j_arr.max() > n):
        raise ValueError(f"batch contains events outside [1, {n}]^2")
    f_row = np.bincount(i_arr - 1, minlength=n).astype(np.float64)
    f_col = np.bincount(j_arr - 1, minlength=n).astype(np.float64)
    if n <= dense_threshold:
        joint = np.zeros((n, n), dtype=np.float64)
        np.add.at(joint, (i_arr - 1, j_arr - 1), 1.0)
    else:
        joint = sp.coo_matrix(
            (np.ones(i_arr.size, dtype=np.float64), (i_arr - 1, j_arr - 1)),
            shape=(n, n),
        ).tocsr()
    return joint, f_row, f_col, int(i_arr.size)


def generate(mode: str, n: int, m: int, seed: int, *,
             lam: float | None = None,
             planted: list[tuple[int, float]] | None = None):
    """Synthetic pair streams, deterministic per seed.

    independent          i and j drawn uniformly and independently
    perfect_dependence   j = i
    mixture              each event dependent (j = i) with probability lam
    planted_rows         planted rows emit (r, r); the rest of the mass is an
                         independent background over the unplanted rows

    Returns (i_arr, j_arr) as 1-based int64 arrays of length m.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    if mode not in GENERATOR_MODES:
        raise ValueError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    if mode == "independent":
        lam = 0.0
    elif mode == "perfect_dependence":
        lam = 1.0
    if mode in ("independent", "perfect_dependence", "mixture"):
        if lam is None:
            raise ValueError("mixture mode requires lam")
        if not 0.0 <= lam <= 1.0:
            raise ValueError(f"lam must be in [0, 1], got {lam}")
        i_arr = rng.integers(1, n + 1, size=m)
        dependent = rng.random(m) < lam
        j_ind = rng.integers(1, n + 1, size=m)
        j_arr = np.where(dependent, i_arr, j_ind)
        return i_arr.astype(np.int64), j_arr.astype(np.int64)

    if not planted:
        raise ValueError("planted_rows mode requires a planted list")
    rows = [r for r, _ in planted]
    fracs = np.array([f for _, f in planted], dtype=np.float64)
    if len(set(rows)) != len(rows):
        raise ValueError("planted rows must be distinct")
    if any(not 1 <= r <= n for r in rows):
        raise ValueError("planted rows must lie in [1, n]")
    if np.any(fracs < 0) or fracs.sum() > 1.0 + 1e-12:
        raise ValueError("planted fractions must be non-negative and sum to <= 1")
    background = np.setdiff1d(np.arange(1, n + 1), np.array(rows, dtype=np.int64))
    if fracs.sum() < 1.0 - 1e-12 and background.size == 0:
        raise ValueError("background mass requires at least one unplanted row")
    edges = np.cumsum(fracs)
    u = rng.random(m)
    choice = np.searchsorted(edges, u)  # len(rows) means background
    i_arr = np.empty(m, dtype=np.int64)
    j_arr = np.empty(m, dtype=np.int64)
    for idx, r in enumerate(rows):
        sel = choice == idx
        i_arr[sel] = r
        j_arr[sel] = r
    bg = choice == len(rows)
    count = int(bg.sum())
    if count:
        i_arr[bg] = rng.choice(background, size=count)
        j_arr[bg] = rng.integers(1, n + 1, size=count)
    return i_arr, j_arr
