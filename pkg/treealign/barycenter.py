"""Free-support barycenters of flow profiles and the F_beta clustering score."""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateMeasureError, InputError
from .tree import FlowProfile
from .univariate import LossKind, univariate_cost

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FlowBarycenter:
    """Flow profile with at most k supports.

    Attributes:
        lengths: support lengths, ascending
        masses: support masses (uniform 1/k when produced by flow_barycenter)
        objective: weighted sum of squared W2 distances to the input profiles
        history: objective after initialization and after every update
    """

    lengths: np.ndarray
    masses: np.ndarray
    objective: float = 0.0
    history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def iterations(self) -> int:
        return max(len(self.history) - 1, 0)

    def profile(self) -> FlowProfile:
        return FlowProfile(self.lengths, self.masses)

    @classmethod
    def from_profile(cls, profile: FlowProfile, k: int) -> "FlowBarycenter":
        """Use ``profile`` as is when it has at most ``k`` atoms, else compress it."""
        if profile.size <= k:
            return cls(profile.lengths, profile.masses)
        return flow_barycenter([profile], k=k)


def _pooled_quantiles(
    profiles: Sequence[FlowProfile], p: np.ndarray, k: int
) -> np.ndarray:
    lengths = np.concatenate([pr.lengths for pr in profiles])
    masses = np.concatenate([w * pr.masses for pr, w in zip(profiles, p)])
    order = np.argsort(lengths, kind="stable")
    cum = np.cumsum(masses[order])
    levels = (np.arange(k) + 0.5) / k
    idx = np.clip(np.searchsorted(cum, levels * cum[-1]), 0, lengths.shape[0] - 1)
    return np.asarray(lengths[order][idx])


def quantile_block_means(profile: FlowProfile, k: int) -> np.ndarray:
    """k times the integral of the quantile function over each [j/k, (j+1)/k].

    This is where the monotone plan from k uniform atoms moves each atom, as
    a mass-weighted mean of the profile lengths.
    """
    x = profile.lengths
    cum = np.concatenate([[0.0], np.cumsum(profile.masses)])
    cum_x = np.concatenate([[0.0], np.cumsum(profile.masses * x)])
    grid = np.arange(k + 1) / k * cum[-1]
    idx = np.clip(np.searchsorted(cum, grid, side="right") - 1, 0, x.shape[0] - 1)
    integral = cum_x[idx] + (grid - cum[idx]) * x[idx]
    return k * np.diff(integral)


def _objective(
    lengths: np.ndarray, profiles: Sequence[FlowProfile], p: np.ndarray
) -> float:
    k = lengths.shape[0]
    bary = FlowProfile(lengths, np.full(k, 1.0 / k))
    return math.fsum(
        float(w) * univariate_cost(bary, pr, LossKind.SQUARED) for pr, w in zip(profiles, p)
    )


def flow_barycenter(
    profiles: Sequence[FlowProfile],
    weights: Optional[Sequence[float]] = None,
    k: int = 100,
    max_iter: int = 50,
    tol: float = 1e-9,
    init: Optional[Sequence[float]] = None,
) -> FlowBarycenter:
    """Barycenter of flow profiles under squared 2-Wasserstein with k uniform supports.

    Alternates between the monotone plans to every profile and the support
    update s_j = sum_i p_i * (mean length that plan i sends to support j).

    Args:
        profiles: input profiles
        weights: problem weights p_i (default: uniform), positive, summing to 1
        k: number of barycenter supports
        max_iter: maximum number of updates
        tol: stop once an update lowers the objective by less than this
        init: initial support lengths (default: quantiles of the pooled profiles)

    Returns:
        FlowBarycenter with its objective history

    Raises:
        InputError: If ``profiles`` is empty or the weights are invalid
    """
    if not profiles:
        raise InputError("flow_barycenter needs at least one profile")
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    n = len(profiles)
    p = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
    if p.shape != (n,) or np.any(p <= 0) or abs(float(np.sum(p)) - 1.0) > 1e-12:
        raise InputError("weights must be positive, one per profile, and sum to 1")

    if init is None:
        lengths = _pooled_quantiles(profiles, p, k)
    else:
        lengths = np.sort(np.asarray(init, dtype=float).reshape(-1))
        if lengths.shape[0] != k:
            raise InputError(f"init has {lengths.shape[0]} supports, expected {k}")
        lengths = np.maximum(lengths, 0.0)

    objective = _objective(lengths, profiles, p)
    history = [objective]
    for it in range(max_iter):
        # sorted supports keep every monotone plan aligned with quantile blocks
        target = np.zeros(k)
        for pr, w in zip(profiles, p):
            target += w * quantile_block_means(pr, k)
        lengths = np.maximum(np.sort(target), 0.0)
        new_objective = _objective(lengths, profiles, p)
        history.append(new_objective)
        logger.debug(f"Barycenter iteration {it + 1}: objective {new_objective:.12g}")
        improved = objective - new_objective
        objective = new_objective
        if improved < tol:
            break

    return FlowBarycenter(lengths, np.full(k, 1.0 / k), objective, tuple(history))


def _pairs(counts: np.ndarray) -> int:
    c = counts.astype(np.int64)
    return int(np.sum(c * (c - 1) // 2))


def pair_counts(
    assignment: Sequence[int], labels: Sequence[int]
) -> tuple[int, int, int, int]:
    """Pairwise (TP, FP, FN, TN) decisions of a clustering against class labels."""
    a = np.asarray(assignment)
    y = np.asarray(labels)
    if a.shape != y.shape or a.ndim != 1:
        raise InputError(f"assignment and labels differ in shape: {a.shape} vs {y.shape}")
    if a.shape[0] < 2:
        raise InputError("Need at least two items to count pairs")
    _, a_idx = np.unique(a, return_inverse=True)
    _, y_idx = np.unique(y, return_inverse=True)
    table = np.zeros((a_idx.max() + 1, y_idx.max() + 1), dtype=np.int64)
    np.add.at(table, (a_idx, y_idx), 1)
    n = a.shape[0]
    same_cluster = _pairs(table.sum(axis=1))
    same_class = _pairs(table.sum(axis=0))
    tp = _pairs(table.ravel())
    fp = same_cluster - tp
    fn = same_class - tp
    tn = n * (n - 1) // 2 - tp - fp - fn
    return tp, fp, fn, tn


def f_beta(assignment: Sequence[int], labels: Sequence[int]) -> float:
    """Pairwise F_beta with beta = sqrt(|D| / |S|).

    |S| and |D| count same-class and different-class pairs of ``labels``.

    Raises:
        DegenerateMeasureError: If every pair shares a class or none does
    """
    tp, fp, fn, tn = pair_counts(assignment, labels)
    same = tp + fn
    diff = fp + tn
    if same == 0 or diff == 0:
        raise DegenerateMeasureError(
            f"F_beta undefined with {same} same-class and {diff} different-class pairs"
        )
    if tp == 0:
        return 0.0
    beta2 = diff / same
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return (beta2 + 1.0) * precision * recall / (beta2 * precision + recall)
