"""
treealign - alignment discrepancies between measures on different tree metrics.

This package provides:
- FlowAlign: univariate OT between root-to-support flow profiles, with
  brute-force and incremental root search
- DepthAlign: level-by-level alignment of 2-depth subtree views
- Tree sampling by farthest-point clustering, tree-sliced averaging and a
  sliced Gromov-Wasserstein baseline
- Flow barycenters and k-means over measures
"""

__version__ = "0.1.0"

from .barycenter import FlowBarycenter, f_beta, flow_barycenter
from .depth_align import aligned_depth_align, depth_align, trace_depth_align
from .errors import (
    ConvergenceError,
    DatasetLoadError,
    DegenerateMeasureError,
    InputError,
    TreeAlignError,
)
from .flow_align import (
    RootSearchResult,
    Strategy,
    aligned_flow_align,
    flow_align,
    gw_objective,
)
from .kmeans import ClusteringResult, FlowKMeans, kmeans
from .sampling import (
    Embedding,
    RootMode,
    SamplerConfig,
    farthest_point_clustering,
    sample_aligned_root_trees,
    sample_tree_metric,
)
from .sliced import (
    BaseDiscrepancy,
    SliceSpec,
    discrepancy,
    sliced_gw,
    tree_sliced_discrepancy,
)
from .tree import FlowProfile, Measure, Tree, flow_profile
from .univariate import LossKind, TransportPlan, univariate_ot

__all__ = [
    "BaseDiscrepancy",
    "ClusteringResult",
    "ConvergenceError",
    "DatasetLoadError",
    "DegenerateMeasureError",
    "Embedding",
    "FlowBarycenter",
    "FlowKMeans",
    "FlowProfile",
    "InputError",
    "LossKind",
    "Measure",
    "RootMode",
    "RootSearchResult",
    "SamplerConfig",
    "SliceSpec",
    "Strategy",
    "TransportPlan",
    "Tree",
    "TreeAlignError",
    "aligned_depth_align",
    "aligned_flow_align",
    "depth_align",
    "discrepancy",
    "f_beta",
    "farthest_point_clustering",
    "flow_align",
    "flow_barycenter",
    "flow_profile",
    "gw_objective",
    "kmeans",
    "sample_aligned_root_trees",
    "sample_tree_metric",
    "sliced_gw",
    "trace_depth_align",
    "tree_sliced_discrepancy",
    "univariate_ot",
]
