"""Tree-sliced FlowAlign/DepthAlign and the sliced Gromov-Wasserstein baseline."""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import numpy as np

from .depth_align import aligned_depth_align, depth_align
from .errors import InputError
from .flow_align import Strategy, aligned_flow_align, flow_align
from .parallel import ordered_map
from .sampling import Embedding, PointArray, SamplerConfig, as_points, sample_tree_metric
from .seeding import STREAM_PROJECTION, STREAM_SLICE, derive_int_seed, derive_rng
from .tree import FlowProfile, Measure, Tree, flow_profile
from .univariate import LossKind

logger = logging.getLogger(__name__)


class BaseDiscrepancy(Enum):
    """Discrepancy averaged over slices."""

    FLOW = "flow"  # FlowAlign
    DEPTH = "depth"  # DepthAlign
    SGW = "sgw"  # sliced Gromov-Wasserstein over random projections


@dataclass(frozen=True)
class SliceSpec:
    """How a sliced discrepancy is computed.

    Attributes:
        n_slices: number of tree samples (or projections for SGW)
        base: discrepancy averaged over the slices
        sampler: tree sampler parameters; its seed is replaced per slice
        seed: root seed of the slice (and projection) streams
        aligned: use the sampled roots as given; False searches all root pairs
        joint: sample one tree on the union of both supports per slice
        level_loss: per-level loss of DepthAlign (W2 by default, W1 on request)
        strategy: root-search strategy of FlowAlign when ``aligned`` is False
    """

    n_slices: int = 10
    base: BaseDiscrepancy = BaseDiscrepancy.FLOW
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    seed: int = 0
    aligned: bool = True
    joint: bool = False
    level_loss: LossKind = LossKind.SQUARED
    strategy: Strategy = Strategy.INCREMENTAL

    def __post_init__(self) -> None:
        if self.n_slices < 1:
            raise InputError(f"n_slices must be >= 1, got {self.n_slices}")
        if self.seed < 0:
            raise InputError(f"seed must be non-negative, got {self.seed}")

    def slice_sampler(self, s: int) -> SamplerConfig:
        """Sampler config of slice ``s``; every measure in a slice shares its seed."""
        return replace(self.sampler, seed=derive_int_seed(self.seed, STREAM_SLICE, s))


def _weights(n: int, weights: Optional[Sequence[float]]) -> np.ndarray:
    if weights is None:
        return np.full(n, 1.0 / n)
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if w.shape[0] != n:
        raise InputError(f"Got {n} points but {w.shape[0]} weights")
    return w


def slice_embedding(points: PointArray, spec: SliceSpec, s: int) -> Embedding:
    """Tree of slice ``s`` for one point set.

    The tree depends only on the points and the slice, never on what the
    measure is later compared with.
    """
    return sample_tree_metric(points, spec.slice_sampler(s))


def slice_measures(
    points: PointArray, spec: SliceSpec, weights: Optional[Sequence[float]] = None
) -> list[tuple[Measure, Tree]]:
    """(measure, tree) of every slice for one weighted point set."""
    pts = as_points(points)
    w = _weights(pts.shape[0], weights)
    out = []
    for s in range(spec.n_slices):
        emb = slice_embedding(pts, spec, s)
        out.append((emb.measure(w), emb.tree))
    return out


def slice_profiles(
    points: PointArray, spec: SliceSpec, weights: Optional[Sequence[float]] = None
) -> list[FlowProfile]:
    """Aligned-root flow profile of every slice for one weighted point set."""
    return [flow_profile(m, t) for m, t in slice_measures(points, spec, weights)]


def slice_value(
    mu: Measure, tree_x: Tree, nu: Measure, tree_z: Tree, spec: SliceSpec
) -> float:
    """Base discrepancy of one slice, aligned-root or root-searched per ``spec``."""
    if spec.base is BaseDiscrepancy.FLOW:
        if spec.aligned:
            return aligned_flow_align(mu, tree_x, nu, tree_z)
        return flow_align(mu, tree_x, nu, tree_z, spec.strategy).value
    if spec.base is BaseDiscrepancy.DEPTH:
        if spec.aligned:
            return aligned_depth_align(mu, tree_x, nu, tree_z, spec.level_loss)
        return depth_align(mu, tree_x, nu, tree_z, level_loss=spec.level_loss).value
    raise InputError(f"{spec.base.value} is not a tree-based discrepancy")


def _joint_pair(
    pts_x: np.ndarray,
    w_x: np.ndarray,
    pts_z: np.ndarray,
    w_z: np.ndarray,
    spec: SliceSpec,
    s: int,
) -> tuple[Measure, Measure, Tree]:
    if pts_x.shape[1] != pts_z.shape[1]:
        raise InputError(
            f"Joint sampling needs equal dimensions, got {pts_x.shape[1]} and {pts_z.shape[1]}"
        )
    emb = slice_embedding(np.vstack([pts_x, pts_z]), spec, s)
    n = pts_x.shape[0]
    mu = Measure.merged(emb.node_of_point[:n], w_x)
    nu = Measure.merged(emb.node_of_point[n:], w_z)
    return mu, nu, emb.tree


def tree_sliced_discrepancy(
    mu_points: PointArray,
    nu_points: PointArray,
    spec: SliceSpec,
    mu_weights: Optional[Sequence[float]] = None,
    nu_weights: Optional[Sequence[float]] = None,
    threads: int = 1,
) -> float:
    """Mean of a tree-based discrepancy over ``spec.n_slices`` sampled trees.

    Each slice samples a tree per measure (or one shared tree when
    ``spec.joint``) with the slice's seed; with the default mean-rooted
    sampler the roots are aligned at the support means.

    Args:
        mu_points: (n, d) support points of the first measure
        nu_points: (m, d') support points of the second measure
        spec: slicing parameters (base FLOW or DEPTH)
        mu_weights: weights of ``mu_points`` (default: uniform)
        nu_weights: weights of ``nu_points`` (default: uniform)
        threads: worker threads over slices

    Returns:
        The slice-averaged discrepancy
    """
    pts_x = as_points(mu_points)
    pts_z = as_points(nu_points)
    w_x = _weights(pts_x.shape[0], mu_weights)
    w_z = _weights(pts_z.shape[0], nu_weights)

    def one_slice(s: int) -> float:
        if spec.joint:
            mu, nu, tree = _joint_pair(pts_x, w_x, pts_z, w_z, spec, s)
            return slice_value(mu, tree, nu, tree, spec)
        ex = slice_embedding(pts_x, spec, s)
        ez = slice_embedding(pts_z, spec, s)
        return slice_value(ex.measure(w_x), ex.tree, ez.measure(w_z), ez.tree, spec)

    values = ordered_map(one_slice, range(spec.n_slices), threads)
    logger.debug(f"Tree-sliced {spec.base.value} over {spec.n_slices} slices: {values}")
    return math.fsum(values) / spec.n_slices


def zero_pad(points: PointArray, target_n: int) -> tuple[np.ndarray, np.ndarray]:
    """Append origin points up to ``target_n`` and return (points, uniform weights).

    Raises:
        InputError: If ``target_n`` is smaller than the number of points
    """
    pts = as_points(points)
    n, d = pts.shape
    if target_n < n:
        raise InputError(f"Cannot pad {n} points down to {target_n}")
    padded = np.vstack([pts, np.zeros((target_n - n, d))])
    return padded, np.full(target_n, 1.0 / target_n)


def gw_1d_objective(x: Sequence[float], y: Sequence[float]) -> float:
    """sum_{i,j} ((x_i - x_j)^2 - (y_i - y_j)^2)^2 for paired scalars x_i, y_i.

    Evaluated in O(n) from power sums of the centered inputs; the pairing is
    the index order of ``x`` and ``y``.
    """
    xa = np.asarray(x, dtype=np.float64).reshape(-1)
    ya = np.asarray(y, dtype=np.float64).reshape(-1)
    if xa.shape != ya.shape:
        raise InputError(f"Need equally many values, got {xa.shape[0]} and {ya.shape[0]}")
    n = xa.shape[0]
    xa = xa - xa.mean()
    ya = ya - ya.mean()
    x2, y2 = xa * xa, ya * ya
    sx, sy = float(np.sum(xa)), float(np.sum(ya))
    sx2, sy2 = float(np.sum(x2)), float(np.sum(y2))
    terms = [
        2 * n * float(np.sum(x2 * x2)),
        -8 * float(np.sum(x2 * xa)) * sx,
        6 * sx2 * sx2,
        2 * n * float(np.sum(y2 * y2)),
        -8 * float(np.sum(y2 * ya)) * sy,
        6 * sy2 * sy2,
        -4 * sx2 * sy2,
        -4 * n * float(np.sum(x2 * y2)),
        8 * sx * float(np.sum(xa * y2)),
        8 * sy * float(np.sum(x2 * ya)),
        -8 * float(np.sum(xa * ya)) ** 2,
    ]
    return max(math.fsum(terms), 0.0)


def sliced_gw(
    points_x: PointArray,
    points_y: PointArray,
    n_slices: int = 10,
    seed: int = 0,
    threads: int = 1,
) -> float:
    """Sliced Gromov-Wasserstein between two uniform point sets of equal size.

    Each slice projects both sets on a random unit direction, sorts the
    projections, and keeps the smaller 1-D GW objective of the ascending and
    the anti-sorted pairing, divided by n^2. Slices are averaged.

    Raises:
        InputError: If the point sets differ in size or dimension
    """
    px = as_points(points_x)
    py = as_points(points_y)
    if px.shape != py.shape:
        raise InputError(
            f"sliced_gw needs equal shapes, got {px.shape} and {py.shape}; zero_pad first"
        )
    if n_slices < 1:
        raise InputError(f"n_slices must be >= 1, got {n_slices}")
    n, d = px.shape
    rng = derive_rng(seed, STREAM_PROJECTION)
    directions = rng.standard_normal((n_slices, d))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)

    def one_direction(theta: np.ndarray) -> float:
        x = np.sort(px @ theta)
        y = np.sort(py @ theta)
        return min(gw_1d_objective(x, y), gw_1d_objective(x, y[::-1])) / (n * n)

    values = ordered_map(one_direction, list(directions), threads)
    return math.fsum(values) / n_slices


def discrepancy(
    mu_points: PointArray,
    nu_points: PointArray,
    spec: SliceSpec,
    mu_weights: Optional[Sequence[float]] = None,
    nu_weights: Optional[Sequence[float]] = None,
    threads: int = 1,
) -> float:
    """Sliced discrepancy selected by ``spec.base``, slices spread over ``threads``.

    SGW uses uniform weights and zero-pads the smaller point set.
    """
    if spec.base is BaseDiscrepancy.SGW:
        n = max(len(mu_points), len(nu_points))
        px, _ = zero_pad(mu_points, n)
        py, _ = zero_pad(nu_points, n)
        return sliced_gw(px, py, spec.n_slices, spec.seed, threads)
    return tree_sliced_discrepancy(
        mu_points, nu_points, spec, mu_weights, nu_weights, threads
    )
