"""Rooted weighted trees, discrete measures on their nodes, and flow profiles.

All tree data lives in flat numpy arrays indexed by node id. A tree is
immutable after construction, so every query here is side-effect free.
"""

import logging
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import InputError

logger = logging.getLogger(__name__)

# Measures and profiles must carry unit mass up to this tolerance
MASS_TOL = 1e-12

NodeIds = Union[Sequence[int], np.ndarray]


class Tree:
    """Rooted tree with nonnegative edge lengths.

    Attributes (all read-only after construction)
    ----------------------------------------------
    n_nodes       : int                 Number of nodes.
    root          : int                 Node id of the root.
    parent        : int64  [n_nodes]    Parent id; -1 for the root.
    edge_length   : float64[n_nodes]    Length of the edge to the parent; 0 for the root.
    depth         : int64  [n_nodes]    Depth level, root = 1.
    root_distance : float64[n_nodes]    d_T(root, x).
    children      : tuple of tuples     Child ids of each node, in id order.
    height        : int                 Deepest level H_T.
    """

    def __init__(self, parent: NodeIds, edge_length: Sequence[float]) -> None:
        """Build a tree from parent links.

        Args:
            parent: parent id per node, -1 for the (single) root
            edge_length: length of the edge to the parent per node (ignored for the root)

        Raises:
            InputError: If the links do not form a single rooted tree or a
                length is negative or not finite
        """
        parent_arr = np.asarray(parent, dtype=np.int64).reshape(-1)
        lengths = np.asarray(edge_length, dtype=np.float64).reshape(-1)
        n = parent_arr.shape[0]
        if n == 0:
            raise InputError("A tree needs at least one node")
        if lengths.shape[0] != n:
            raise InputError(
                f"Got {n} parent links but {lengths.shape[0]} edge lengths"
            )

        roots = np.flatnonzero(parent_arr == -1)
        if roots.shape[0] != 1:
            raise InputError(f"Expected exactly one root, found {roots.shape[0]}")
        bad = np.flatnonzero((parent_arr < -1) | (parent_arr >= n))
        if bad.shape[0]:
            raise InputError(
                f"Node {int(bad[0])} has invalid parent {int(parent_arr[bad[0]])}"
            )
        root = int(roots[0])
        lengths = lengths.copy()
        lengths[root] = 0.0
        if not np.all(np.isfinite(lengths)) or np.any(lengths < 0):
            idx = int(np.flatnonzero(~(np.isfinite(lengths) & (lengths >= 0)))[0])
            raise InputError(f"Edge length of node {idx} must be finite and >= 0")

        children: list[list[int]] = [[] for _ in range(n)]
        for v in range(n):
            if v != root:
                children[int(parent_arr[v])].append(v)

        # Preorder walk; also assigns Euler entry/exit times for O(1) ancestry
        depth = np.zeros(n, dtype=np.int64)
        root_distance = np.zeros(n, dtype=np.float64)
        tin = np.full(n, -1, dtype=np.int64)
        tout = np.full(n, -1, dtype=np.int64)
        preorder: list[int] = []
        depth[root] = 1
        clock = 0
        stack: list[tuple[int, bool]] = [(root, False)]
        while stack:
            v, done = stack.pop()
            if done:
                tout[v] = clock
                continue
            tin[v] = clock
            clock += 1
            preorder.append(v)
            stack.append((v, True))
            for c in reversed(children[v]):
                depth[c] = depth[v] + 1
                root_distance[c] = root_distance[v] + lengths[c]
                stack.append((c, False))

        if len(preorder) != n:
            unreached = int(np.flatnonzero(tin < 0)[0])
            raise InputError(f"Node {unreached} does not reach the root (cycle)")

        self.n_nodes: int = n
        self.root: int = root
        self.parent = parent_arr
        self.edge_length = lengths
        self.depth = depth
        self.root_distance = root_distance
        self.children: tuple[tuple[int, ...], ...] = tuple(tuple(c) for c in children)
        self.preorder = np.asarray(preorder, dtype=np.int64)
        self.height: int = int(depth.max())
        self._tin = tin
        self._tout = tout
        for arr in (
            self.parent,
            self.edge_length,
            self.depth,
            self.root_distance,
            self.preorder,
            self._tin,
            self._tout,
        ):
            arr.setflags(write=False)

    # Construction helpers

    @classmethod
    def from_parents(
        cls, parents: NodeIds, lengths: Optional[Sequence[float]] = None
    ) -> "Tree":
        """Build from parent links; unit edge lengths when ``lengths`` is None."""
        n = len(parents)
        return cls(parents, np.ones(n) if lengths is None else lengths)

    @classmethod
    def from_text(cls, text: str) -> "Tree":
        """Parse the line format ``node_id parent_id edge_length`` (root has parent -1).

        Blank lines and lines starting with ``#`` are ignored. Ids must be the
        contiguous range 0..N-1 in any order.
        """
        rows: dict[int, tuple[int, float]] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) != 3:
                raise InputError(
                    f"line {lineno}: expected 'node_id parent_id edge_length', got {raw!r}"
                )
            try:
                node, par, length = int(fields[0]), int(fields[1]), float(fields[2])
            except ValueError as e:
                raise InputError(f"line {lineno}: {e}") from e
            if node in rows:
                raise InputError(f"line {lineno}: node {node} listed twice")
            rows[node] = (par, length)
        n = len(rows)
        if sorted(rows) != list(range(n)):
            raise InputError("Node ids must be contiguous integers starting at 0")
        return cls([rows[i][0] for i in range(n)], [rows[i][1] for i in range(n)])

    def to_text(self) -> str:
        """Serialize to the line format read by :meth:`from_text`."""
        lines = [
            f"{v} {int(self.parent[v])} {float(self.edge_length[v])!r}"
            for v in range(self.n_nodes)
        ]
        return "\n".join(lines) + "\n"

    # Basic queries

    def check_node(self, u: int) -> int:
        """Return ``u`` as int, raising InputError if it is not a node id."""
        try:
            node = int(u)
        except (TypeError, ValueError) as e:
            raise InputError(f"Invalid node id {u!r}") from e
        if node != u or not 0 <= node < self.n_nodes:
            raise InputError(f"Invalid node id {u!r} (tree has {self.n_nodes} nodes)")
        return node

    def check_nodes(self, nodes: NodeIds) -> np.ndarray:
        """Vector form of :meth:`check_node`."""
        arr = np.asarray(nodes)
        if arr.size and not np.issubdtype(arr.dtype, np.integer):
            raise InputError(f"Node ids must be integers, got dtype {arr.dtype}")
        arr = arr.astype(np.int64).reshape(-1)
        bad = (arr < 0) | (arr >= self.n_nodes)
        if np.any(bad):
            raise InputError(
                f"Invalid node id {int(arr[bad][0])} (tree has {self.n_nodes} nodes)"
            )
        return arr

    def is_ancestor(self, a: int, v: int) -> bool:
        """True if ``a`` lies on the root path of ``v`` (a node is its own ancestor)."""
        return bool(self._tin[a] <= self._tin[v] < self._tout[a])

    def leaves(self) -> list[int]:
        """Nodes without children, in id order."""
        return [v for v in range(self.n_nodes) if not self.children[v]]

    def internal_nodes(self) -> list[int]:
        """Nodes with at least one child, in id order."""
        return [v for v in range(self.n_nodes) if self.children[v]]

    def lowest_common_ancestor(self, u: int, v: int) -> int:
        """Deepest node on both root-to-u and root-to-v paths."""
        u = self.check_node(u)
        v = self.check_node(v)
        while self.depth[u] > self.depth[v]:
            u = int(self.parent[u])
        while self.depth[v] > self.depth[u]:
            v = int(self.parent[v])
        while u != v:
            u = int(self.parent[u])
            v = int(self.parent[v])
        return u

    def common_ancestors_with(self, r: int, nodes: NodeIds) -> np.ndarray:
        """LCA of ``r`` with each of ``nodes``.

        Walks each node up until it meets the root path of ``r``; used when
        re-rooting at ``r`` so one path marking serves every support.
        """
        r = self.check_node(r)
        arr = self.check_nodes(nodes)
        out = np.empty_like(arr)
        for k, z in enumerate(arr.tolist()):
            while not self.is_ancestor(z, r):
                z = int(self.parent[z])
            out[k] = z
        return out

    def tree_distance(self, u: int, v: int) -> float:
        """Length of the unique u-v path."""
        w = self.lowest_common_ancestor(u, v)
        rd = self.root_distance
        return float(rd[u] + rd[v] - 2.0 * rd[w])

    def distances_from(self, r: int, nodes: NodeIds) -> np.ndarray:
        """d_T(r, z) for every z in ``nodes``.

        Uses d(r, z) = d(root, r) + d(root, z) - 2 d(root, lca(r, z)) so the
        value is bit-identical however the caller found the ancestor.
        """
        arr = self.check_nodes(nodes)
        lca = self.common_ancestors_with(r, arr)
        rd = self.root_distance
        return rd[r] + rd[arr] - 2.0 * rd[lca]

    def path(self, u: int, v: int) -> list[int]:
        """Nodes of P(u, v) from u to v, both included."""
        w = self.lowest_common_ancestor(u, v)
        up: list[int] = []
        x = u
        while x != w:
            up.append(x)
            x = int(self.parent[x])
        down: list[int] = []
        x = v
        while x != w:
            down.append(x)
            x = int(self.parent[x])
        return up + [w] + down[::-1]

    def subtree_nodes(self, x: int) -> set[int]:
        """Gamma(x): every node whose root path contains ``x``."""
        x = self.check_node(x)
        out = {x}
        stack = list(self.children[x])
        while stack:
            v = stack.pop()
            out.add(v)
            stack.extend(self.children[v])
        return out

    def rerooted(self, r: int) -> "Tree":
        """Same tree with ``r`` as root; node ids and distances are kept."""
        r = self.check_node(r)
        if r == self.root:
            return self
        parent = self.parent.copy()
        lengths = self.edge_length.copy()
        chain = self.path(r, self.root)
        parent[r] = -1
        lengths[r] = 0.0
        # Flip every edge on the old root path
        for child, up in zip(chain, chain[1:]):
            parent[up] = child
            lengths[up] = self.edge_length[child]
        return Tree(parent, lengths)

    def subtree_masses(self, measure: "Measure") -> np.ndarray:
        """mu(Gamma(x)) for every node x, in one bottom-up pass."""
        self.check_nodes(measure.supports)
        mass = np.zeros(self.n_nodes, dtype=np.float64)
        np.add.at(mass, measure.supports, measure.weights)
        for v in self.preorder[::-1].tolist():
            if v != self.root:
                mass[self.parent[v]] += mass[v]
        return mass

    def __repr__(self) -> str:
        return f"Tree(n_nodes={self.n_nodes}, root={self.root}, height={self.height})"


@dataclass(frozen=True, eq=False)
class Measure:
    """Discrete probability measure supported on distinct tree nodes."""

    supports: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        supports = np.asarray(self.supports)
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if supports.size and not np.issubdtype(supports.dtype, np.integer):
            raise InputError(f"Supports must be integer node ids, got {supports.dtype}")
        supports = supports.astype(np.int64).reshape(-1)
        if supports.shape[0] == 0:
            raise InputError("A measure needs at least one support")
        if supports.shape[0] != weights.shape[0]:
            raise InputError(
                f"Got {supports.shape[0]} supports but {weights.shape[0]} weights"
            )
        if np.unique(supports).shape[0] != supports.shape[0]:
            raise InputError("Measure supports must be distinct node ids")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise InputError("Weights must be finite and nonnegative")
        total = float(np.sum(weights))
        if abs(total - 1.0) > MASS_TOL:
            raise InputError(f"Weights must sum to 1, got {total!r}")
        supports.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "supports", supports)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def normalized(cls, supports: NodeIds, weights: Sequence[float]) -> "Measure":
        """Build a measure after dividing ``weights`` by their sum."""
        w = np.asarray(weights, dtype=np.float64)
        total = float(np.sum(w))
        if not total > 0:
            raise InputError("Weights must have a positive sum")
        return cls(np.asarray(supports), w / total)

    @classmethod
    def uniform(cls, supports: NodeIds) -> "Measure":
        """Equal weights on ``supports``."""
        s = np.asarray(supports)
        return cls.normalized(s, np.ones(s.shape[0]))

    @classmethod
    def merged(cls, nodes: NodeIds, weights: Sequence[float]) -> "Measure":
        """Sum the weights of repeated nodes, then normalize.

        Used when several input points land on the same tree node.
        """
        nodes_arr = np.asarray(nodes, dtype=np.int64).reshape(-1)
        w = np.asarray(weights, dtype=np.float64).reshape(-1)
        if nodes_arr.shape[0] != w.shape[0]:
            raise InputError(f"Got {nodes_arr.shape[0]} nodes but {w.shape[0]} weights")
        uniq, inverse = np.unique(nodes_arr, return_inverse=True)
        summed = np.zeros(uniq.shape[0], dtype=np.float64)
        np.add.at(summed, inverse, w)
        return cls.normalized(uniq, summed)

    @property
    def size(self) -> int:
        return int(self.supports.shape[0])

    def weight_of(self, node: int) -> float:
        """Mass on ``node`` (0 if it is not a support)."""
        hit = np.flatnonzero(self.supports == node)
        return float(self.weights[hit[0]]) if hit.shape[0] else 0.0


@dataclass(frozen=True, eq=False)
class FlowProfile:
    """Sorted 1-D pushforward of a measure through d_T(root, .).

    Equal lengths are kept as adjacent entries; ``order`` records which
    entry of the source atoms each profile entry came from.
    """

    lengths: np.ndarray
    masses: np.ndarray
    order: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        lengths = np.asarray(self.lengths, dtype=np.float64).reshape(-1)
        masses = np.asarray(self.masses, dtype=np.float64).reshape(-1)
        if lengths.shape[0] == 0 or lengths.shape != masses.shape:
            raise InputError(
                f"Profile needs matching nonempty arrays, got {lengths.shape} and {masses.shape}"
            )
        if not np.all(np.isfinite(lengths)) or np.any(lengths < 0):
            raise InputError("Profile lengths must be finite and nonnegative")
        if np.any(np.diff(lengths) < 0):
            raise InputError("Profile lengths must be sorted ascending")
        if np.any(masses <= 0):
            raise InputError("Profile masses must be positive")
        total = float(np.sum(masses))
        if abs(total - 1.0) > MASS_TOL:
            raise InputError(f"Profile masses must sum to 1, got {total!r}")
        lengths.setflags(write=False)
        masses.setflags(write=False)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "masses", masses)

    @classmethod
    def from_atoms(
        cls, lengths: Sequence[float], masses: Sequence[float]
    ) -> "FlowProfile":
        """Sort unsorted atoms stably by length; zero-mass atoms are dropped."""
        x = np.asarray(lengths, dtype=np.float64).reshape(-1)
        a = np.asarray(masses, dtype=np.float64).reshape(-1)
        if x.shape != a.shape:
            raise InputError(f"Got {x.shape[0]} lengths but {a.shape[0]} masses")
        keep = np.flatnonzero(a > 0)
        order = keep[np.argsort(x[keep], kind="stable")]
        return cls(x[order], a[order], order)

    @property
    def size(self) -> int:
        return int(self.lengths.shape[0])

    def __iter__(self) -> Iterator[tuple[float, float]]:
        return iter(zip(self.lengths.tolist(), self.masses.tolist()))


def tree_distance(tree: Tree, u: int, v: int) -> float:
    """Sum of edge lengths along the unique u-v path."""
    return tree.tree_distance(u, v)


def lowest_common_ancestor(tree: Tree, u: int, v: int) -> int:
    """Deepest node lying on both root-to-u and root-to-v paths."""
    return tree.lowest_common_ancestor(u, v)


def subtree_nodes(tree: Tree, x: int) -> set[int]:
    """All nodes whose root path contains ``x``, including ``x``."""
    return tree.subtree_nodes(x)


def flow_profile(measure: Measure, tree: Tree, root: Optional[int] = None) -> FlowProfile:
    """Sorted (d_T(root, x_i), a_i) pairs of ``measure``.

    Args:
        measure: measure whose supports are nodes of ``tree``
        tree: the tree metric
        root: node to measure flows from (default: the tree root)

    Returns:
        FlowProfile sorted by (length, support index); zero-weight supports are dropped

    Raises:
        InputError: If a support is not a node of ``tree``
    """
    try:
        supports = tree.check_nodes(measure.supports)
    except InputError as e:
        raise InputError(f"Measure support not in tree: {e}") from e
    if root is None or root == tree.root:
        lengths = tree.root_distance[supports]
    else:
        lengths = tree.distances_from(tree.check_node(root), supports)
    return FlowProfile.from_atoms(lengths, measure.weights)
