"""DepthAlign: level-by-level alignment of two measures on rooted trees.

At a pair of aligned nodes (x, z) each measure is viewed through its
2-depth-level tree: x itself plus one atom per child whose mass is that
child's share of the subtree mass. The two views are aligned by univariate
OT over child edge lengths; every transported pair of atoms is aligned in
turn one level deeper, weighted by the mass it carries.
"""

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateMeasureError, InputError
from .flow_align import (
    Candidates,
    RootSearchResult,
    best_root_pair,
    candidate_roots,
)
from .parallel import ordered_map
from .tree import MASS_TOL, FlowProfile, Measure, Tree
from .univariate import LossKind, TransportPlan, univariate_ot

logger = logging.getLogger(__name__)

# Plan entries carrying less mass than this are not aligned further
DUST = 1e-15


@dataclass(frozen=True, eq=False)
class TwoDepthMeasure:
    """Measure seen from ``center``: the center atom plus one atom per child subtree.

    Only atoms with positive mass are kept; the center atom (flow length 0)
    comes first, children follow in tree order.
    """

    center: int
    nodes: np.ndarray
    masses: np.ndarray
    lengths: np.ndarray

    @property
    def child_mass(self) -> float:
        return float(np.sum(self.masses[self.nodes != self.center]))

    @property
    def is_simple(self) -> bool:
        """True when no mass sits strictly below the center."""
        return self.child_mass < MASS_TOL

    def profile(self) -> FlowProfile:
        return FlowProfile.from_atoms(self.lengths, self.masses)


@dataclass(frozen=True)
class AlignmentItem:
    """A pair of aligned nodes carrying ``mass`` at depth ``level``.

    A side flagged as a point stands for the node's own atom only, so it is
    simple regardless of what lies below the node.
    """

    pair: tuple[int, int]
    mass: float
    level: int
    point: tuple[bool, bool] = (False, False)


@dataclass
class LevelMass:
    """Mass ledger of one depth level."""

    level: int
    live: float = 0.0
    resolved: float = 0.0
    dropped: float = 0.0


@dataclass
class DepthAlignTrace:
    """Value of one aligned-root DepthAlign run and its per-level ledger."""

    value: float
    levels: list[LevelMass] = field(default_factory=list)

    def conservation_gaps(self) -> list[float]:
        """|live mass + mass finished at shallower levels - 1| per level."""
        gaps = []
        finished = 0.0
        for lv in self.levels:
            gaps.append(abs(lv.live + finished - 1.0))
            finished += lv.resolved + lv.dropped
        return gaps


class _MeasureView:
    """Subtree sums of a measure on a tree, shared by every node query."""

    def __init__(self, measure: Measure, tree: Tree) -> None:
        try:
            supports = tree.check_nodes(measure.supports)
        except InputError as e:
            raise InputError(f"Measure support not in tree: {e}") from e
        self.tree = tree
        self.point_mass = np.zeros(tree.n_nodes)
        np.add.at(self.point_mass, supports, measure.weights)
        self.subtree_mass = tree.subtree_masses(measure)
        # sum of mass * d(root, s) over each subtree
        moment = self.point_mass * tree.root_distance
        for v in tree.preorder[::-1].tolist():
            if v != tree.root:
                moment[tree.parent[v]] += moment[v]
        self.subtree_moment = moment

    def two_depth(self, x: int) -> TwoDepthMeasure:
        total = float(self.subtree_mass[x])
        if total <= 0.0:
            raise DegenerateMeasureError(f"Measure has no mass below node {x}")
        tree = self.tree
        nodes = [x]
        masses = [float(self.point_mass[x]) / total]
        lengths = [0.0]
        for c in tree.children[x]:
            m = float(self.subtree_mass[c])
            if m > 0.0:
                nodes.append(c)
                masses.append(m / total)
                lengths.append(float(tree.edge_length[c]))
        if masses[0] <= 0.0:
            nodes, masses, lengths = nodes[1:], masses[1:], lengths[1:]
        return TwoDepthMeasure(
            x,
            np.asarray(nodes, dtype=np.int64),
            np.asarray(masses),
            np.asarray(lengths),
        )

    def spread(self, x: int) -> float:
        """Mass-weighted mean path length from ``x`` to the measure below it."""
        total = float(self.subtree_mass[x])
        if total <= 0.0:
            return 0.0
        mean = float(self.subtree_moment[x]) / total - float(self.tree.root_distance[x])
        return max(mean, 0.0)


def two_depth_measure(mu: Measure, tree: Tree, x: int) -> TwoDepthMeasure:
    """2-depth-level view of ``mu`` at node ``x``.

    Raises:
        DegenerateMeasureError: If ``mu`` puts no mass on the subtree of ``x``
    """
    x = tree.check_node(x)
    return _MeasureView(mu, tree).two_depth(x)


def _level_value(
    p: FlowProfile, q: FlowProfile, level_loss: LossKind
) -> tuple[float, TransportPlan]:
    cost, plan = univariate_ot(p, q, level_loss)
    if level_loss is LossKind.SQUARED:
        cost = math.sqrt(cost)
    return cost, plan


def _run(
    view_x: _MeasureView,
    view_z: _MeasureView,
    level_loss: LossKind,
) -> DepthAlignTrace:
    root_pair = (view_x.tree.root, view_z.tree.root)
    queue: deque[AlignmentItem] = deque([AlignmentItem(root_pair, 1.0, 1)])
    terms: list[float] = []
    ledger: dict[int, LevelMass] = {}

    while queue:
        item = queue.popleft()
        lv = ledger.setdefault(item.level, LevelMass(item.level))
        lv.live += item.mass
        x, z = item.pair

        tx = None if item.point[0] else view_x.two_depth(x)
        tz = None if item.point[1] else view_z.two_depth(z)
        simple_x = tx is None or tx.is_simple
        simple_z = tz is None or tz.is_simple

        if simple_x and simple_z:
            lv.resolved += item.mass
            continue
        if simple_x or simple_z:
            spread = view_z.spread(z) if simple_x else view_x.spread(x)
            terms.append(item.mass * spread)
            lv.resolved += item.mass
            continue

        assert tx is not None and tz is not None
        p, q = tx.profile(), tz.profile()
        value, plan = _level_value(p, q, level_loss)
        terms.append(item.mass * value)
        assert p.order is not None and q.order is not None
        for i, j, m in plan.entries():
            child_mass = item.mass * m
            if child_mass < DUST:
                lv.dropped += child_mass
                continue
            nx = int(tx.nodes[p.order[i]])
            nz = int(tz.nodes[q.order[j]])
            queue.append(
                AlignmentItem((nx, nz), child_mass, item.level + 1, (nx == x, nz == z))
            )

    value = math.fsum(terms)
    return DepthAlignTrace(value, [ledger[h] for h in sorted(ledger)])


def _views(mu: Measure, tree: Tree, root: Optional[int]) -> _MeasureView:
    if root is not None:
        tree = tree.rerooted(root)
    return _MeasureView(mu, tree)


def trace_depth_align(
    mu: Measure,
    tree_x: Tree,
    nu: Measure,
    tree_z: Tree,
    level_loss: LossKind = LossKind.SQUARED,
    root_x: Optional[int] = None,
    root_z: Optional[int] = None,
) -> DepthAlignTrace:
    """Aligned-root DepthAlign together with its per-level mass ledger."""
    return _run(_views(mu, tree_x, root_x), _views(nu, tree_z, root_z), level_loss)


def aligned_depth_align(
    mu: Measure,
    tree_x: Tree,
    nu: Measure,
    tree_z: Tree,
    level_loss: LossKind = LossKind.SQUARED,
    root_x: Optional[int] = None,
    root_z: Optional[int] = None,
) -> float:
    """Aligned-root DepthAlign between ``mu`` on ``tree_x`` and ``nu`` on ``tree_z``.

    Pairs of nodes are processed from a FIFO queue seeded with the two roots
    and mass 1:

    * both 2-depth views simple: nothing to pay;
    * one view simple: pay the mass times the mean path length from the
      other node to the measure in its subtree, and stop;
    * otherwise: pay the mass times the univariate distance between the two
      views and queue every transported atom pair with its share of the mass.

    Args:
        mu: measure on ``tree_x``
        tree_x: first tree
        nu: measure on ``tree_z``
        tree_z: second tree
        level_loss: SQUARED (default) compares views with W2, ABSOLUTE with W1
        root_x: re-root ``tree_x`` here first (default: its own root)
        root_z: re-root ``tree_z`` here first (default: its own root)

    Returns:
        The DepthAlign value
    """
    return trace_depth_align(mu, tree_x, nu, tree_z, level_loss, root_x, root_z).value


def depth_align(
    mu: Measure,
    tree_x: Tree,
    nu: Measure,
    tree_z: Tree,
    candidates: Candidates = "all",
    level_loss: LossKind = LossKind.SQUARED,
    threads: int = 1,
) -> RootSearchResult:
    """DepthAlign minimized over candidate roots of both trees (exhaustive)."""
    roots_x = candidate_roots(tree_x, candidates)
    roots_z = candidate_roots(tree_z, candidates)
    views_x = {r: _views(mu, tree_x, r) for r in roots_x}
    views_z = {r: _views(nu, tree_z, r) for r in roots_z}

    def row(rx: int) -> list[float]:
        return [_run(views_x[rx], views_z[rz], level_loss).value for rz in roots_z]

    values = ordered_map(row, roots_x, threads)
    best, best_pair = best_root_pair(values, roots_x, roots_z)
    logger.debug(
        f"DepthAlign root search over {len(roots_x)}x{len(roots_z)} pairs: "
        f"value={best:.6g} at {best_pair}"
    )
    return RootSearchResult(best, best_pair)
