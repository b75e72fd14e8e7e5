"""Online hierarchical clustering over a self-repairing binary cluster tree.

Points arrive one at a time and are routed to their nearest leaf with
bounding-box-guided search; the tree is then repaired with masking- and
balance-based rotations, and can optionally cap its leaf count by merging
leaves.  Evaluation (dendrogram purity, pairwise F1) and K-way flat
extraction operate on the finished tree.
"""

from .extraction import FlatClustering, extract_flat, node_cost
from .geometry import (
    BoundingBox,
    box_extend,
    box_from_point,
    box_union,
    d_minus_box,
    d_minus_point,
    d_plus_box,
    d_plus_point,
)
from .metrics import (
    EvalReport,
    GroundTruth,
    UndefinedMetricError,
    dendrogram_purity_exact,
    dendrogram_purity_mc,
    generate_separable,
    lca,
    pairwise_f1,
    purity,
    verify_separable,
)
from .rotation import (
    RotationDecision,
    build_tree,
    check_balanced,
    check_masked,
    insert,
    is_masked_approx,
    is_masked_exact,
    local_balance,
    rotate_rec,
    tree_balance,
)
from .search import SearchResult, nearest_neighbor_astar, nearest_neighbor_beam
from .tree import ClusterTree, EmptyTreeError, ModeConfig, Node, Point

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "ClusterTree",
    "EmptyTreeError",
    "EvalReport",
    "FlatClustering",
    "GroundTruth",
    "ModeConfig",
    "Node",
    "Point",
    "RotationDecision",
    "SearchResult",
    "UndefinedMetricError",
    "box_extend",
    "box_from_point",
    "box_union",
    "build_tree",
    "check_balanced",
    "check_masked",
    "d_minus_box",
    "d_minus_point",
    "d_plus_box",
    "d_plus_point",
    "dendrogram_purity_exact",
    "dendrogram_purity_mc",
    "extract_flat",
    "generate_separable",
    "insert",
    "is_masked_approx",
    "is_masked_exact",
    "lca",
    "local_balance",
    "node_cost",
    "nearest_neighbor_astar",
    "nearest_neighbor_beam",
    "pairwise_f1",
    "purity",
    "rotate_rec",
    "tree_balance",
    "verify_separable",
]
