"""Key-row location: vote over random row bipartitions of a masked matrix.

Each of N iterations splits the rows in two with a fresh pairwise-independent
bit hash and asks the matrix-norm blackbox for both halves.  An iteration
votes for the half that dominates by the configured ratio and abstains
otherwise; a row that agrees with at least a 3/4 fraction of the votes is
declared the key row and weighed with the vector blackbox.  If a key row
exists in the masked matrix it wins the vote with high probability; if no
row dominates, the abstention exit fires.

KeyRowBank runs many independent key-row instances over disjoint row groups
in a single pass: iteration hashes and sketch coefficients are shared across
groups (each group's marginal guarantee is unaffected; only cross-group
correlations appear, and nothing downstream depends on those), while every
iteration draws fresh coefficients so votes stay independent across
iterations.  All accumulators are linear in the stream, so batches are
applied from pre-aggregated counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .hadamard import RCalibration, thresholds
from .hashing import BitHash, complement, derive_seed, had
from .sketches import (C1_REPS, C2_REPS, DEFAULT_TRUNCATION,
                       ConfigurationError, cauchy_coefficients)

NO_KEY_ROW_INDEX = -1


@dataclass(frozen=True)
class KeyRowConfig:
    """Knobs for one key-row search (one masked matrix)."""

    n: int
    iterations: int
    tau_threshold: float
    eps: float
    ba2_reps: int
    ba1_reps: int
    vote_fraction: float = 0.75
    abstain_fraction: float = 2.0 / 3.0
    delta2: float | None = None
    truncation: float = DEFAULT_TRUNCATION
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError(f"n must be >= 1, got {self.n}")
        if self.iterations < 1:
            raise ConfigurationError(f"iterations must be >= 1, got {self.iterations}")
        if not 0.0 < self.eps <= 1.0:
            raise ConfigurationError(f"eps must be in (0, 1], got {self.eps}")
        if self.vote_fraction <= 0.5:
            raise ConfigurationError("vote fraction must exceed 1/2")
        if self.tau_threshold <= 1.0:
            raise ConfigurationError("tau threshold must exceed 1")
        if self.delta2 is not None:
            floor = C2_REPS * math.log(1.0 / self.delta2)
            if self.ba2_reps < floor:
                raise ConfigurationError(
                    f"ba2_reps={self.ba2_reps} below floor {floor:.0f} "
                    f"for delta2={self.delta2}")

    @classmethod
    def faithful(cls, n: int, eps: float, seed: int,
                 r_fn: RCalibration | None = None) -> "KeyRowConfig":
        """Constants straight from the analysis; huge at any realistic n."""
        r_fn = r_fn or RCalibration()
        _, tau = thresholds(n, eps, r_fn)
        delta2 = 1.0 / 32.0
        delta1 = min(0.25, 1.0 / max(2.0, math.log2(n)) ** 2)
        eps_prime = eps / 2.0
        return cls(
            n=n,
            iterations=max(16, math.ceil(8 * math.log2(max(2, n)))),
            tau_threshold=tau,
            eps=eps,
            ba2_reps=math.ceil(C2_REPS * math.log(1.0 / delta2)),
            ba1_reps=math.ceil(C1_REPS * math.log(1.0 / delta1) / eps_prime**2),
            delta2=delta2,
            seed=seed,
        )

    @classmethod
    def practical(cls, n: int, eps: float, seed: int, *,
                  iterations: int = 16, tau_threshold: float = 8.0,
                  ba2_reps: int = 32, ba1_reps: int = 256) -> "KeyRowConfig":
        """Desk-scale constants; correctness is validated statistically."""
        return cls(
            n=n,
            iterations=iterations,
            tau_threshold=tau_threshold,
            eps=eps,
            ba2_reps=ba2_reps,
            ba1_reps=ba1_reps,
            seed=seed,
        )


@dataclass(frozen=True)
class KeyRowOutcome:
    """Either no-key-row, encoded as (-1, 0), or a found (row, weight) pair."""

    index: int = NO_KEY_ROW_INDEX
    weight: float = 0.0

    @property
    def is_found(self) -> bool:
        return self.index != NO_KEY_ROW_INDEX

    @classmethod
    def no_key_row(cls) -> "KeyRowOutcome":
        return cls()

    @classmethod
    def found(cls, index: int, weight: float) -> "KeyRowOutcome":
        if index < 1:
            raise ValueError(f"row index must be >= 1, got {index}")
        if weight < 0.0:
            raise ValueError(f"weight must be >= 0, got {weight}")
        return cls(index, weight)

    def as_pair(self) -> tuple[int, float]:
        return (self.index, self.weight)


def vote_tally(match_counts: np.ndarray, iterations: int,
               vote_fraction: float) -> int | None:
    """1-based index of the row meeting the vote threshold, or None.

    Multiple qualifying rows break the tie toward the lowest index (the
    analysis makes a tie vanishingly unlikely; determinism helps testing).
    """
    counts = np.asarray(match_counts)
    threshold = vote_fraction * iterations - 1e-9
    winners = np.flatnonzero(counts >= threshold)
    if winners.size == 0:
        return None
    return int(winners[0]) + 1


def _decide(y1: np.ndarray, y0: np.ndarray, hl_bits: np.ndarray,
            eligible: np.ndarray, cfg: KeyRowConfig, ba1_value) -> tuple[KeyRowOutcome, dict]:
    """The pure decision phase shared by every front end.

    y1[l] / y0[l] are the blackbox values for the two sides of iteration l;
    hl_bits is the (N, n) matrix of iteration-hash bits; eligible gates the
    rows the vote may name (only rows of the masked matrix can be its key
    row).  An iteration commits only when exactly one side dominates, so the
    all-zero matrix abstains everywhere.
    """
    tau = cfg.tau_threshold
    n_iter = cfg.iterations
    c0 = y0 >= tau * y1
    c1 = y1 >= tau * y0
    vote0 = c0 & ~c1
    vote1 = c1 & ~c0
    abstentions = n_iter - int(vote0.sum()) - int(vote1.sum())
    diag = {"abstentions": abstentions, "iterations": n_iter}
    if abstentions >= cfg.abstain_fraction * n_iter - 1e-9:
        return KeyRowOutcome.no_key_row(), diag
    rows = np.flatnonzero(eligible)
    if rows.size == 0:
        return KeyRowOutcome.no_key_row(), diag
    bits = hl_bits[:, rows]
    matches = bits[vote1].sum(axis=0) + (1 - bits[vote0]).sum(axis=0)
    counts = np.full(hl_bits.shape[1], -1, dtype=np.int64)
    counts[rows] = matches
    winner = vote_tally(counts, n_iter, cfg.vote_fraction)
    if winner is None:
        return KeyRowOutcome.no_key_row(), diag
    return KeyRowOutcome.found(winner, float(ba1_value())), diag


def iteration_hash(cfg_seed: int, n: int, ell: int) -> BitHash:
    return BitHash(derive_seed(cfg_seed, "iter", ell), n)


def find_key_row(ba2, ba1, mask, cfg: KeyRowConfig) -> KeyRowOutcome:
    """Key-row search against callable blackboxes (e.g. the simulated ones).

    ba2 and ba1 map a row mask to an estimate of the masked matrix norm and
    of the masked aggregate-vector norm respectively; ba1 is only consulted
    when the vote produces a row.
    """
    n = mask.n
    if cfg.n != n:
        raise ConfigurationError(f"config domain {cfg.n} != mask domain {n}")
    y1 = np.empty(cfg.iterations)
    y0 = np.empty(cfg.iterations)
    hl_bits = np.empty((cfg.iterations, n), dtype=np.uint8)
    for ell in range(cfg.iterations):
        h_ell = iteration_hash(cfg.seed, n, ell)
        hl_bits[ell] = h_ell.values()
        y1[ell] = ba2(had(mask, h_ell))
        y0[ell] = ba2(had(mask, complement(h_ell)))
    eligible = mask.values().astype(bool)
    outcome, _ = _decide(y1, y0, hl_bits, eligible, cfg, lambda: ba1(mask))
    return outcome


class KeyRowBank:
    """Many key-row searches over disjoint row groups, one streaming pass.

    assignment maps each row (0-based) to a group id, or -1 for rows outside
    every group.  Group g's search sees the matrix restricted to its rows.
    Iteration hashes and Cauchy coefficients are shared across groups;
    coefficients are fresh per iteration.
    """

    def __init__(self, n: int, assignment: np.ndarray, cfg: KeyRowConfig):
        if cfg.n != n:
            raise ConfigurationError(f"config domain {cfg.n} != bank domain {n}")
        assignment = np.asarray(assignment, dtype=np.int64)
        if assignment.shape != (n,):
            raise ValueError(f"assignment must have shape ({n},)")
        self.n = n
        self.cfg = cfg
        self.assignment = assignment
        self.groups = int(assignment.max()) + 1 if (assignment >= 0).any() else 0
        n_iter, k2, k1 = cfg.iterations, cfg.ba2_reps, cfg.ba1_reps

        self._hl_bits = np.stack([
            iteration_hash(cfg.seed, n, ell).values() for ell in range(n_iter)
        ])
        # Coefficient matrices, derived from the seed; a recomputable cache
        # that stays out of the serialized/accounted state.
        self._x = np.vstack([
            cauchy_coefficients(derive_seed(cfg.seed, "ba2-row", ell, t), n,
                                cfg.truncation)
            for ell in range(n_iter) for t in range(k2)
        ])
        self._y = np.vstack([
            cauchy_coefficients(derive_seed(cfg.seed, "ba2-col", ell, t), n,
                                cfg.truncation)
            for ell in range(n_iter) for t in range(k2)
        ])
        self._c = np.vstack([
            cauchy_coefficients(derive_seed(cfg.seed, "ba1-col", t), n)
            for t in range(k1)
        ])
        gate = np.repeat(self._hl_bits[:, None, :], k2, axis=1).reshape(n_iter * k2, n)
        self._w1 = self._x * gate
        self._w0 = self._x * (1 - gate)

        alive = assignment >= 0
        rows = np.flatnonzero(alive)
        self._onehot = sp.csr_matrix(
            (np.ones(rows.size), (assignment[rows], rows)),
            shape=(max(self.groups, 1), n),
        )
        self._group_rows = [np.flatnonzero(assignment == g) for g in range(self.groups)]

        self.b1 = np.zeros((max(self.groups, 1), 2, n_iter * k2))
        self.b2 = np.zeros((max(self.groups, 1), 2, n_iter * k2))
        self.b3 = np.zeros(n_iter * k2)
        self.a1 = np.zeros((max(self.groups, 1), k1))
        self.a2 = np.zeros(k1)
        self.f_s = np.zeros(max(self.groups, 1))
        self.m_seen = 0

    def update_from_counts(self, joint, f_row, f_col, count) -> None:
        g_cols = joint @ self._y.T            # (n, N*k2)
        self.b1[:, 1, :] += self._onehot @ (self._w1 * g_cols.T).T
        self.b1[:, 0, :] += self._onehot @ (self._w0 * g_cols.T).T
        self.b2[:, 1, :] += self._onehot @ (self._w1 * f_row).T
        self.b2[:, 0, :] += self._onehot @ (self._w0 * f_row).T
        self.b3 += self._y @ f_col
        self.a1 += self._onehot @ (joint @ self._c.T)
        self.a2 += self._c @ f_col
        self.f_s += self._onehot @ f_row
        self.m_seen += int(count)

    def ingest_batch(self, i_arr, j_arr) -> None:
        from .stream import batch_counts
        self.update_from_counts(*batch_counts(self.n, i_arr, j_arr))

    def finalize(self) -> tuple[list[KeyRowOutcome], list[dict]]:
        n_iter, k2 = self.cfg.iterations, self.cfg.ba2_reps
        outcomes: list[KeyRowOutcome] = []
        diags: list[dict] = []
        if self.groups == 0:
            return outcomes, diags
        if self.m_seen == 0:
            empty = KeyRowOutcome.no_key_row()
            return ([empty] * self.groups,
                    [{"abstentions": n_iter, "iterations": n_iter}] * self.groups)
        m = float(self.m_seen)
        vals = self.b1 / m - self.b2 * (self.b3 / m**2)
        vals = np.abs(vals).reshape(self.groups, 2, n_iter, k2)
        y_sides = np.median(vals, axis=3)     # (groups, 2, N)
        ba1_vals = self.a1 / m - np.outer(self.f_s, self.a2) / m**2
        ba1_est = np.median(np.abs(ba1_vals), axis=1)
        eligible = np.zeros(self.n, dtype=bool)
        for g in range(self.groups):
            eligible[:] = False
            eligible[self._group_rows[g]] = True
            outcome, diag = _decide(
                y_sides[g, 1], y_sides[g, 0], self._hl_bits, eligible,
                self.cfg, lambda g=g: ba1_est[g])
            outcomes.append(outcome)
            diags.append(diag)
        return outcomes, diags

    def space_bytes(self) -> int:
        """Accumulators and counters only; coefficients are seed-derived."""
        return (self.b1.nbytes + self.b2.nbytes + self.b3.nbytes
                + self.a1.nbytes + self.a2.nbytes + self.f_s.nbytes + 8)


def find_key_row_stream(i_arr, j_arr, n: int, mask, cfg: KeyRowConfig) -> KeyRowOutcome:
    """One-shot streaming key-row search under a single row mask."""
    assignment = np.where(mask.values().astype(bool), 0, -1)
    bank = KeyRowBank(n, assignment, cfg)
    bank.ingest_batch(i_arr, j_arr)
    outcomes, _ = bank.finalize()
    return outcomes[0] if outcomes else KeyRowOutcome.no_key_row()
