"""Clustering-based tree metric sampling.

Points are clustered hierarchically with farthest-point clustering; every
cluster becomes a node placed at the cluster mean and is linked to its
parent by the Euclidean distance between the two locations.
"""

import logging
from collections import deque
from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Union

import numpy as np
from scipy.spatial.distance import cdist

from .errors import InputError
from .parallel import ordered_map
from .seeding import STREAM_INIT, STREAM_MEASURE, derive_int_seed, derive_rng
from .tree import Measure, Tree

logger = logging.getLogger(__name__)

PointArray = Union[np.ndarray, Sequence[Sequence[float]]]


class RootMode(Enum):
    """Where the sampled tree is rooted."""

    MEAN = "mean"  # mean of the input points
    FIXED = "fixed"  # a caller-supplied point


class InitRule(Enum):
    """How the first farthest-point center is chosen."""

    RANDOM = "random"
    FIRST = "first"


@dataclass(frozen=True)
class SamplerConfig:
    """Parameters of the clustering-based tree sampler.

    Attributes:
        num_clusters: branching factor kappa of every clustering step
        max_depth: deepest level H_T of the sampled tree (root is level 1)
        seed: root seed for the first-center draws
        root_mode: where the root is placed
        root_point: location of the root when ``root_mode`` is FIXED
        init: first-center rule; FIRST always starts from the lowest point index
    """

    num_clusters: int = 4
    max_depth: int = 6
    seed: int = 0
    root_mode: RootMode = RootMode.MEAN
    root_point: Optional[tuple[float, ...]] = None
    init: InitRule = InitRule.RANDOM

    def __post_init__(self) -> None:
        if self.num_clusters < 2:
            raise InputError(f"num_clusters must be >= 2, got {self.num_clusters}")
        if self.max_depth < 2:
            raise InputError(f"max_depth must be >= 2, got {self.max_depth}")
        if not 0 <= self.seed < 2**64:
            raise InputError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.root_mode is RootMode.FIXED and self.root_point is None:
            raise InputError("root_mode FIXED requires root_point")
        if self.root_point is not None:
            object.__setattr__(
                self, "root_point", tuple(float(c) for c in self.root_point)
            )

    @property
    def max_nodes(self) -> int:
        """Upper bound on the node count of a sampled tree."""
        k = self.num_clusters
        return (k**self.max_depth - 1) // (k - 1)


@dataclass(frozen=True, eq=False)
class Embedding:
    """A sampled tree together with the point each node stands for."""

    tree: Tree
    point_of_node: np.ndarray
    node_of_point: np.ndarray = field(repr=False)

    def measure(self, weights: Optional[Sequence[float]] = None) -> Measure:
        """Measure on the tree induced by the input points.

        Points bound to the same node have their weights summed.
        """
        n = self.node_of_point.shape[0]
        w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
        return Measure.merged(self.node_of_point, w)


def as_points(points: PointArray) -> np.ndarray:
    """Validate a point set and return it as a float (n, d) array."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise InputError(f"Expected a nonempty (n, d) point array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError("Points must be finite")
    return arr


def _farthest_point_indices(
    pts: np.ndarray, num_clusters: int, init_index: int
) -> tuple[np.ndarray, np.ndarray]:
    centers = [init_index]
    min_dist = cdist(pts, pts[[init_index]])[:, 0]
    while len(centers) < num_clusters:
        # argmax returns the lowest index among equal distances
        nxt = int(np.argmax(min_dist))
        if min_dist[nxt] == 0.0:
            break  # every remaining point coincides with a center
        centers.append(nxt)
        min_dist = np.minimum(min_dist, cdist(pts, pts[[nxt]])[:, 0])
    center_idx = np.asarray(centers, dtype=np.int64)
    assignment = np.argmin(cdist(pts, pts[center_idx]), axis=1)
    return center_idx, assignment.astype(np.int64)


def farthest_point_clustering(
    points: PointArray, num_clusters: int, init_index: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Greedy k-center clustering.

    Args:
        points: (n, d) input points
        num_clusters: maximum number of centers
        init_index: index of the point used as the first center

    Returns:
        (centers, assignment): the (m, d) center points, m <= num_clusters,
        and the nearest-center index of every point (ties go to the lower center)

    Raises:
        InputError: If the input is empty or init_index is out of range
    """
    pts = as_points(points)
    if num_clusters < 1:
        raise InputError(f"num_clusters must be >= 1, got {num_clusters}")
    if not 0 <= init_index < pts.shape[0]:
        raise InputError(f"init_index {init_index} out of range for {pts.shape[0]} points")
    center_idx, assignment = _farthest_point_indices(pts, num_clusters, init_index)
    return pts[center_idx], assignment


def _root_location(pts: np.ndarray, config: SamplerConfig) -> np.ndarray:
    if config.root_mode is RootMode.MEAN:
        return np.asarray(pts.mean(axis=0))
    root = np.asarray(config.root_point, dtype=np.float64)
    if root.shape != (pts.shape[1],):
        raise InputError(
            f"root_point has dimension {root.shape[0]}, points have {pts.shape[1]}"
        )
    return root


def sample_tree_metric(
    points: PointArray,
    config: SamplerConfig,
    rng: Optional[np.random.Generator] = None,
) -> Embedding:
    """Embed points into a tree sampled by hierarchical farthest-point clustering.

    Clustering stops at singleton sets, at coinciding points, or when
    children would lie deeper than ``config.max_depth``. Each input point is bound
    to the node where its recursion stopped.

    Args:
        points: (n, d) input points
        config: sampler parameters
        rng: generator for first-center draws (default: derived from config.seed)

    Returns:
        The sampled Embedding
    """
    pts = as_points(points)
    n = pts.shape[0]
    if rng is None:
        rng = derive_rng(config.seed, STREAM_INIT)

    parents: list[int] = [-1]
    lengths: list[float] = [0.0]
    locations: list[np.ndarray] = [_root_location(pts, config)]
    node_of_point = np.full(n, -1, dtype=np.int64)

    # (node id, member point indices, level h with root at 0)
    queue: deque[tuple[int, np.ndarray, int]] = deque([(0, np.arange(n), 0)])
    while queue:
        node, members, h = queue.popleft()
        m = members.shape[0]
        fixed_root = h == 0 and config.root_mode is RootMode.FIXED
        if h + 1 >= config.max_depth or (m == 1 and not fixed_root):
            node_of_point[members] = node
            continue

        subset = pts[members]
        init = 0 if config.init is InitRule.FIRST else int(rng.integers(m))
        _, assignment = _farthest_point_indices(subset, config.num_clusters, init)
        n_groups = int(assignment.max()) + 1
        if n_groups == 1 and not fixed_root:
            # all members coincide with this node's location
            node_of_point[members] = node
            continue

        for g in range(n_groups):
            group = members[assignment == g]
            if group.shape[0] == 0:
                continue
            center = pts[group].mean(axis=0)
            child = len(parents)
            parents.append(node)
            lengths.append(float(np.linalg.norm(center - locations[node])))
            locations.append(center)
            queue.append((child, group, h + 1))

    tree = Tree(parents, lengths)
    logger.debug(
        f"Sampled tree with {tree.n_nodes} nodes, height {tree.height} for {n} points"
    )
    return Embedding(tree, np.vstack(locations), node_of_point)


def sample_aligned_root_trees(
    measure_points: Sequence[PointArray], config: SamplerConfig, threads: int = 1
) -> list[Embedding]:
    """Sample one tree per point set, each rooted by ``config.root_mode``.

    With RootMode.MEAN every root sits at its own measure's support mean,
    which aligns the roots across measures. Per-measure seeds are derived
    from ``config.seed`` and the measure index, so ``threads`` never changes
    the trees.
    """

    def one(i: int) -> Embedding:
        sub = replace(config, seed=derive_int_seed(config.seed, STREAM_MEASURE, i))
        return sample_tree_metric(measure_points[i], sub)

    return ordered_map(one, range(len(measure_points)), threads)
