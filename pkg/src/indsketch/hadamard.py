"""Entrywise scalar maps on matrices and the exact norm/weight computations.

The maps in scope are even, subadditive, non-negative, and zero at the
origin: absolute value and |x|**p for 0 < p <= 1.  Matrices are plain numpy
arrays; rows are addressed 1-based to match the stream domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class HadamardFunction:
    """A scalar map applied entrywise, e.g. g(x) = |x| or g(x) = |x|**p."""

    kind: str
    power: float = 1.0

    def __post_init__(self):
        if self.kind not in ("abs", "abs-power"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.kind == "abs-power" and not 0.0 < self.power <= 1.0:
            raise ValueError(f"power must be in (0, 1], got {self.power}")

    def __call__(self, x):
        a = np.abs(x)
        if self.kind == "abs":
            return a
        return a ** self.power

    @classmethod
    def l1(cls) -> "HadamardFunction":
        return cls("abs")

    @classmethod
    def abs_power(cls, p: float) -> "HadamardFunction":
        if p == 1.0:
            return cls.l1()
        return cls("abs-power", p)

    def label(self) -> str:
        return "l1" if self.kind == "abs" else f"lp:{self.power:g}"


@dataclass(frozen=True)
class RCalibration:
    """The multiplicative factor r(n) of the matrix-norm blackbox.

    No closed form is known for the factor the median estimator actually
    achieves, so it is a calibration object: r(n) = max(floor, c_r * ln n),
    with c_r refinable from data (see the CLI calibrate command).
    """

    c_r: float = 4.0
    floor: float = 2.0

    def __call__(self, n: int) -> float:
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        return max(self.floor, self.c_r * math.log(n))


def matrix_norm(g: HadamardFunction, a: np.ndarray) -> float:
    """Sum of g over every entry of the matrix."""
    return float(np.sum(g(a)))


def row_weights(g: HadamardFunction, a: np.ndarray) -> np.ndarray:
    """Per-row sums of g; the weight vector whose total is matrix_norm."""
    return np.sum(g(a), axis=1)


def aggregate_norm(g: HadamardFunction, a: np.ndarray, mask) -> float:
    """Sum of g over the column totals of the mask-selected rows.

    This is the exact quantity the vector blackbox approximates: entries of
    unselected rows are zeroed, rows are summed into one vector (signed, so
    cancellation happens here), then g is applied per coordinate.
    """
    if mask.n != a.shape[0]:
        raise ValueError(f"mask domain {mask.n} != matrix rows {a.shape[0]}")
    v = mask.values().astype(np.float64) @ a
    return float(np.sum(g(v)))


def is_alpha_heavy(u: np.ndarray, i: int, alpha: float) -> bool:
    """True iff row i holds more than an alpha fraction of the total weight."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if not 1 <= i <= len(u):
        raise IndexError(f"row {i} outside [1, {len(u)}]")
    return bool(u[i - 1] > alpha * float(np.sum(u)))


def is_key_row(u: np.ndarray, i: int, rho: float) -> bool:
    """True iff row i outweighs all other rows combined by a factor rho.

    For rho >= 1 at most one row can satisfy this, which is what makes the
    per-bucket vote meaningful.
    """
    if rho < 1.0:
        raise ValueError(f"rho must be >= 1, got {rho}")
    if not 1 <= i <= len(u):
        raise IndexError(f"row {i} outside [1, {len(u)}]")
    ui = float(u[i - 1])
    return ui > rho * (float(np.sum(u)) - ui)


def thresholds(n: int, eps: float, r_fn: RCalibration) -> tuple[float, float]:
    """The (rho, tau) threshold pair at domain size n and accuracy eps.

    rho = r(n)**4 / eps separates key rows from the rest; tau =
    2048 * r(n)**2 / eps is the vote ratio that lets an iteration commit to
    one side of a bipartition.  2048 is the tightest constant for which the
    abstention case analysis goes through.
    """
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"eps must be in (0, 1], got {eps}")
    r = r_fn(n)
    if r < 1.0:
        raise ValueError(f"r(n) must be >= 1, got {r}")
    return r**4 / eps, 2048.0 * r**2 / eps
