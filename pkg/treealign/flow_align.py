"""FlowAlign: aligned-root value, root search and the GW objective evaluator.

A measure on a rooted tree is summarized by its flow profile, the sorted
lengths of the root-to-support paths with their masses. Aligned-root
FlowAlign is the univariate 2-Wasserstein distance between two profiles;
FlowAlign minimizes it over the choice of root in both trees.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np

from .errors import InputError
from .parallel import ordered_map
from .tree import FlowProfile, Measure, Tree, flow_profile
from .univariate import LossKind, TransportPlan, monotone_merge, univariate_ot

logger = logging.getLogger(__name__)


class Strategy(Enum):
    """How per-root flow profiles are produced during root search."""

    BRUTE = "brute"  # recompute and re-sort for every root pair
    INCREMENTAL = "incremental"  # derive every root's order from the base order


Candidates = Union[str, Sequence[int]]


@dataclass(frozen=True, eq=False)
class RootSearchResult:
    """Minimum over root pairs and the pair that achieves it."""

    value: float
    best_roots: tuple[int, int]
    per_root_profiles: Optional[
        tuple[dict[int, FlowProfile], dict[int, FlowProfile]]
    ] = None


def candidate_roots(tree: Tree, candidates: Candidates = "all") -> list[int]:
    """Resolve a candidate-root specification to sorted node ids.

    Args:
        tree: the tree
        candidates: "all" for every node, "internal" for nodes with children
            (the root alone for a single-node tree), or explicit node ids
    """
    if isinstance(candidates, str):
        if candidates == "all":
            return list(range(tree.n_nodes))
        if candidates == "internal":
            return tree.internal_nodes() or [tree.root]
        raise InputError(f"Unknown candidate set {candidates!r}")
    roots = sorted({int(r) for r in tree.check_nodes(list(candidates)).tolist()})
    if not roots:
        raise InputError("Candidate root set is empty")
    return roots


def aligned_flow_align(
    mu: Measure,
    tree_x: Tree,
    nu: Measure,
    tree_z: Tree,
    root_x: Optional[int] = None,
    root_z: Optional[int] = None,
) -> float:
    """Aligned-root FlowAlign between ``mu`` on ``tree_x`` and ``nu`` on ``tree_z``.

    The trees' own roots are used unless ``root_x``/``root_z`` re-root them.
    """
    cost, _ = univariate_ot(
        flow_profile(mu, tree_x, root_x),
        flow_profile(nu, tree_z, root_z),
        LossKind.SQUARED,
    )
    return math.sqrt(cost)


def _support_plan(
    plan: TransportPlan, p: FlowProfile, q: FlowProfile, mu: Measure, nu: Measure
) -> TransportPlan:
    assert p.order is not None and q.order is not None
    return TransportPlan(
        mu.size, nu.size, p.order[plan.rows], q.order[plan.cols], plan.masses
    )


def aligned_flow_align_plan(
    mu: Measure,
    tree_x: Tree,
    nu: Measure,
    tree_z: Tree,
    root_x: Optional[int] = None,
    root_z: Optional[int] = None,
) -> tuple[float, TransportPlan]:
    """Aligned-root FlowAlign value with its optimal plan indexed by measure supports."""
    p = flow_profile(mu, tree_x, root_x)
    q = flow_profile(nu, tree_z, root_z)
    cost, plan = univariate_ot(p, q, LossKind.SQUARED)
    return math.sqrt(cost), _support_plan(plan, p, q, mu, nu)


def _run(
    lengths: np.ndarray, base: np.ndarray, weights: np.ndarray, pos: np.ndarray
) -> list[tuple[float, int, float]]:
    return [(float(lengths[p]), int(base[p]), float(weights[base[p]])) for p in pos]


def _sorted_run(entries: list[tuple[float, int, float]]) -> list[tuple[float, int, float]]:
    # Rounding can produce equal lengths out of index order; restore (length, index)
    for p in range(len(entries) - 1):
        if entries[p + 1][:2] < entries[p][:2]:
            return sorted(entries, key=lambda t: (t[0], t[1]))
    return entries


def rerooted_profiles(
    measure: Measure, tree: Tree, roots: Sequence[int]
) -> dict[int, FlowProfile]:
    """Flow profiles of ``measure`` for every root in ``roots``.

    Starting from the order under the tree's own root, the order under a new
    root r is assembled from runs that are already sorted:

    * supports below r keep their order (lengths shrink by d(root, r));
    * supports on the path from the root to r come in reverse order;
    * every other support hangs off that path at its closest common
      ancestor with r; each such group keeps its order.

    When r's subtree holds no support and the path touches no support, the
    whole order is one run shifted by d(root, r). Runs are merged, so
    lengths, masses and provenance match :func:`flow_profile` bit for bit.
    """
    supports = tree.check_nodes(measure.supports)
    weights = measure.weights
    rd = tree.root_distance
    positive = np.flatnonzero(weights > 0)
    base = positive[np.argsort(rd[supports[positive]], kind="stable")]
    z = supports[base]
    k = base.shape[0]

    out: dict[int, FlowProfile] = {}
    for r in roots:
        r = tree.check_node(r)
        lca = tree.common_ancestors_with(r, z)
        lengths = rd[r] + rd[z] - 2.0 * rd[lca]
        below = lca == r
        on_path = (lca == z) & ~below

        runs: list[list[tuple[float, int, float]]] = []
        pos_below = np.flatnonzero(below)
        if pos_below.shape[0]:
            runs.append(_run(lengths, base, weights, pos_below))
        pos_path = np.flatnonzero(on_path)[::-1]
        if pos_path.shape[0]:
            runs.append(_run(lengths, base, weights, pos_path))
        off = ~(below | on_path)
        off_pos = np.flatnonzero(off)
        if off_pos.shape[0]:
            anchors = lca[off_pos]
            for anchor in dict.fromkeys(anchors.tolist()):
                runs.append(_run(lengths, base, weights, off_pos[anchors == anchor]))

        runs = [_sorted_run(run) for run in runs]
        if 2 * len(runs) > k:
            # many tiny runs: a plain sort is cheaper than the merge
            merged = sorted((e for run in runs for e in run), key=lambda t: (t[0], t[1]))
        else:
            merged = monotone_merge(runs, key=lambda t: (t[0], t[1]))
        out[r] = FlowProfile(
            np.asarray([e[0] for e in merged]),
            np.asarray([e[2] for e in merged]),
            np.asarray([e[1] for e in merged], dtype=np.int64),
        )
    return out


def best_root_pair(
    values: list[list[float]], roots_x: list[int], roots_z: list[int]
) -> tuple[float, tuple[int, int]]:
    """Minimum of a root-pair value table; ties go to the smallest (root_x, root_z)."""
    best = math.inf
    best_pair = (roots_x[0], roots_z[0])
    for a, row in zip(roots_x, values):
        for b, v in zip(roots_z, row):
            if v < best:
                best, best_pair = v, (a, b)
    return best, best_pair


def flow_align(
    mu: Measure,
    tree_x: Tree,
    nu: Measure,
    tree_z: Tree,
    strategy: Strategy = Strategy.INCREMENTAL,
    candidates: Candidates = "all",
    keep_profiles: bool = False,
    threads: int = 1,
) -> RootSearchResult:
    """FlowAlign with root search over both trees.

    Args:
        mu: measure on ``tree_x``
        tree_x: first tree
        nu: measure on ``tree_z``
        tree_z: second tree
        strategy: BRUTE recomputes both profiles for every root pair;
            INCREMENTAL builds each tree's profiles once and reuses them
        candidates: candidate roots, applied to both trees ("all", "internal")
        keep_profiles: return the per-root profile caches (INCREMENTAL only)
        threads: worker threads for the root-pair evaluations

    Returns:
        RootSearchResult with the minimal value and the lexicographically
        smallest root pair achieving it
    """
    roots_x = candidate_roots(tree_x, candidates)
    roots_z = candidate_roots(tree_z, candidates)

    if strategy is Strategy.BRUTE:

        def brute_row(rx: int) -> list[float]:
            row = []
            for rz in roots_z:
                cost, _ = univariate_ot(
                    flow_profile(mu, tree_x, rx),
                    flow_profile(nu, tree_z, rz),
                    LossKind.SQUARED,
                )
                row.append(math.sqrt(cost))
            return row

        values = ordered_map(brute_row, roots_x, threads)
        value, pair = best_root_pair(values, roots_x, roots_z)
        logger.debug(f"Brute-force root search over {len(roots_x)}x{len(roots_z)} pairs")
        return RootSearchResult(value, pair)

    if strategy is not Strategy.INCREMENTAL:
        raise InputError(f"Unknown strategy {strategy!r}")

    prof_x = rerooted_profiles(mu, tree_x, roots_x)
    prof_z = rerooted_profiles(nu, tree_z, roots_z)

    def cached_row(rx: int) -> list[float]:
        p = prof_x[rx]
        return [
            math.sqrt(univariate_ot(p, prof_z[rz], LossKind.SQUARED)[0]) for rz in roots_z
        ]

    values = ordered_map(cached_row, roots_x, threads)
    value, pair = best_root_pair(values, roots_x, roots_z)
    logger.debug(
        f"Incremental root search over {len(roots_x)}x{len(roots_z)} pairs: "
        f"value={value:.6g} at {pair}"
    )
    return RootSearchResult(value, pair, (prof_x, prof_z) if keep_profiles else None)


def _pairwise_tree_distances(measure: Measure, tree: Tree) -> np.ndarray:
    return np.vstack(
        [tree.distances_from(int(s), measure.supports) for s in measure.supports]
    )


def gw_objective(
    plan: TransportPlan, mu: Measure, tree_x: Tree, nu: Measure, tree_z: Tree
) -> float:
    """Gromov-Wasserstein objective of ``plan`` with tree distances (squared loss).

    Sums |d_X(x_i, x_i') - d_Z(z_j, z_j')|^2 T_ij T_i'j' directly over the
    plan's nonzero entries.

    Raises:
        InputError: If the plan's marginals do not match ``mu`` and ``nu``
    """
    plan.check_marginals(mu.weights, nu.weights)
    dx = _pairwise_tree_distances(mu, tree_x)
    dz = _pairwise_tree_distances(nu, tree_z)
    r, c, m = plan.rows, plan.cols, plan.masses
    diff = dx[np.ix_(r, r)] - dz[np.ix_(c, c)]
    return float(np.sum(diff * diff * np.outer(m, m)))
