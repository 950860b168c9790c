"""Closed-form one-dimensional optimal transport between flow profiles.

``univariate_ot`` is the two-pointer sweep over sorted atoms and returns the
monotone plan. ``univariate_cost`` evaluates the same cost through quantile
functions without building the plan and is used where profiles are long
(barycenters, k-means).
"""

import heapq
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Optional

import numpy as np

from .errors import InputError
from .tree import FlowProfile

# Residual masses below this are treated as exhausted
RESIDUAL_EPS = 1e-15
# Allowed difference between the total masses of the two sides
BALANCE_TOL = 1e-10


class LossKind(Enum):
    """Ground loss between two flow lengths."""

    ABSOLUTE = "absolute"  # |x - z|
    SQUARED = "squared"  # |x - z|^2

    def __call__(self, x: float, z: float) -> float:
        d = abs(x - z)
        return d if self is LossKind.ABSOLUTE else d * d


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Sparse coupling given as (row, col, mass) triplets with mass > 0."""

    n_rows: int
    n_cols: int
    rows: np.ndarray
    cols: np.ndarray
    masses: np.ndarray

    @property
    def nnz(self) -> int:
        return int(self.masses.shape[0])

    def row_sums(self) -> np.ndarray:
        out = np.zeros(self.n_rows)
        np.add.at(out, self.rows, self.masses)
        return out

    def col_sums(self) -> np.ndarray:
        out = np.zeros(self.n_cols)
        np.add.at(out, self.cols, self.masses)
        return out

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n_rows, self.n_cols))
        np.add.at(out, (self.rows, self.cols), self.masses)
        return out

    def entries(self) -> Iterable[tuple[int, int, float]]:
        return zip(self.rows.tolist(), self.cols.tolist(), self.masses.tolist())

    def check_marginals(
        self, a: Sequence[float], b: Sequence[float], tol: float = BALANCE_TOL
    ) -> None:
        """Raise InputError unless row sums match ``a`` and column sums match ``b``."""
        a_arr = np.asarray(a, dtype=float)
        b_arr = np.asarray(b, dtype=float)
        if a_arr.shape != (self.n_rows,) or b_arr.shape != (self.n_cols,):
            raise InputError(
                f"Plan is {self.n_rows}x{self.n_cols}, marginals have sizes "
                f"{a_arr.shape[0]} and {b_arr.shape[0]}"
            )
        row_err = float(np.max(np.abs(self.row_sums() - a_arr)))
        col_err = float(np.max(np.abs(self.col_sums() - b_arr)))
        if row_err > tol or col_err > tol:
            raise InputError(
                f"Plan marginals off by {max(row_err, col_err):.3e} (tolerance {tol:.0e})"
            )

    def to_text(self) -> str:
        """Dump as ``i j mass`` lines."""
        return "".join(f"{i} {j} {m!r}\n" for i, j, m in self.entries())


def _check_sorted(profile: FlowProfile, name: str) -> None:
    if np.any(np.diff(profile.lengths) < 0):
        raise InputError(f"{name} flow lengths are not sorted ascending")


def _check_balance(mu: FlowProfile, nu: FlowProfile) -> None:
    gap = abs(float(np.sum(mu.masses)) - float(np.sum(nu.masses)))
    if gap > BALANCE_TOL:
        raise InputError(f"Total masses differ by {gap:.3e}")


def univariate_ot(
    mu: FlowProfile, nu: FlowProfile, loss: LossKind = LossKind.SQUARED
) -> tuple[float, TransportPlan]:
    """Optimal transport between two sorted 1-D measures by a two-pointer sweep.

    The monotone (north-west corner on sorted atoms) coupling is optimal for
    any convex loss. With ``LossKind.SQUARED`` the returned cost is the
    squared 2-Wasserstein distance; callers take the square root.

    Args:
        mu: source profile
        nu: target profile
        loss: ground loss

    Returns:
        (cost, plan)

    Raises:
        InputError: If a profile is unsorted or the total masses differ
    """
    _check_sorted(mu, "Source")
    _check_sorted(nu, "Target")
    _check_balance(mu, nu)

    x = mu.lengths.tolist()
    z = nu.lengths.tolist()
    a_all = mu.masses.tolist()
    b_all = nu.masses.tolist()
    n, m = len(x), len(z)

    rows: list[int] = []
    cols: list[int] = []
    moved: list[float] = []
    terms: list[float] = []
    i = j = 0
    a, b = a_all[0], b_all[0]
    while i < n and j < m:
        if a <= b:
            mass = a
            b -= a
            if b < RESIDUAL_EPS:
                b = 0.0
            ii, jj = i, j
            i += 1
            if i < n:
                a = a_all[i]
        else:
            mass = b
            a -= b
            if a < RESIDUAL_EPS:
                a = 0.0
            ii, jj = i, j
            j += 1
            if j < m:
                b = b_all[j]
        if mass > 0.0:
            rows.append(ii)
            cols.append(jj)
            moved.append(mass)
            terms.append(mass * loss(x[ii], z[jj]))

    plan = TransportPlan(
        n,
        m,
        np.asarray(rows, dtype=np.int64),
        np.asarray(cols, dtype=np.int64),
        np.asarray(moved, dtype=np.float64),
    )
    return math.fsum(terms), plan


def univariate_cost(
    mu: FlowProfile, nu: FlowProfile, loss: LossKind = LossKind.SQUARED
) -> float:
    """Cost of :func:`univariate_ot` computed from quantile functions.

    Integrates loss(F_mu^-1(q), F_nu^-1(q)) over the merged cumulative-mass
    breakpoints. Agrees with the sweep up to rounding.
    """
    _check_balance(mu, nu)
    cu = np.cumsum(mu.masses)
    cv = np.cumsum(nu.masses)
    qs = np.unique(np.concatenate([cu, cv]))
    dq = np.diff(qs, prepend=0.0)
    iu = np.clip(np.searchsorted(cu, qs), 0, mu.size - 1)
    iv = np.clip(np.searchsorted(cv, qs), 0, nu.size - 1)
    gap = np.abs(mu.lengths[iu] - nu.lengths[iv])
    if loss is LossKind.SQUARED:
        gap = gap * gap
    return math.fsum((dq * gap).tolist())


def monotone_merge(
    sorted_runs: Sequence[Sequence[Any]],
    key: Optional[Callable[[Any], Any]] = None,
) -> list[Any]:
    """k-way merge of ascending runs into one ascending list.

    Equal keys keep (run index, position) order.

    Raises:
        InputError: If a run is not sorted
    """
    for r, run in enumerate(sorted_runs):
        keys = [key(v) for v in run] if key is not None else list(run)
        if any(keys[p + 1] < keys[p] for p in range(len(keys) - 1)):
            raise InputError(f"Run {r} is not sorted ascending")
    return list(heapq.merge(*sorted_runs, key=key))
