"""Nearest-neighbor leaf retrieval over the cluster tree.

Two strategies: exact best-first search ordered by the lower distance bound
(admissible, so the returned leaf holds the globally nearest stored point),
and a width-limited level-synchronous beam search that trades exactness for
a bounded frontier.

Searches are read-only over a quiescent tree and may run concurrently with
each other.  Frontier expansion could be parallelized without changing
results as long as candidates are reduced deterministically; this
implementation is sequential.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .geometry import d_minus_point
from .tree import ClusterTree, EmptyTreeError, Node

__all__ = ["SearchResult", "nearest_neighbor_astar", "nearest_neighbor_beam"]


@dataclass
class SearchResult:
    """Leaf returned by a search, with its exact distance to the query.

    For a collapsed leaf the distance is the exact minimum over the stored
    points, computed by scanning them.  ``expansions`` counts nodes popped
    from the frontier (diagnostics).
    """

    leaf: Node
    distance: float
    expansions: int


def _as_query(tree: ClusterTree, x) -> np.ndarray:
    if tree.root is None:
        raise EmptyTreeError("cannot search an empty tree")
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or (tree.dim is not None and x.shape[0] != tree.dim):
        raise ValueError(f"query dimension {x.shape} does not match tree dimension {tree.dim}")
    return x


def leaf_distance(tree: ClusterTree, leaf: Node, x: np.ndarray) -> float:
    """Exact distance from x to the nearest point stored in the leaf."""
    ids = leaf.point_ids
    if len(ids) == 1:
        d = tree.points[ids[0]].features - x
        return float(np.sqrt(np.dot(d, d)))
    feats = np.array([tree.points[i].features for i in ids])
    return float(np.min(np.sqrt(np.sum(np.square(feats - x), axis=1))))


def nearest_neighbor_astar(tree: ClusterTree, x) -> SearchResult:
    """Exact nearest-neighbor leaf via best-first search on the d- bound.

    The frontier is a priority queue keyed by the lower bound (ties broken
    by node id).  Because the bound is admissible and exact for plain
    leaves, the search stops as soon as the best exact distance seen is no
    worse than the smallest bound remaining on the frontier.
    """
    x = _as_query(tree, x)
    root = tree.root
    frontier: list[tuple[float, int, Node]] = [(d_minus_point(x, root.box), root.id, root)]
    best: Node | None = None
    best_dist = float("inf")
    expansions = 0
    while frontier:
        bound, _, node = heapq.heappop(frontier)
        if best is not None and bound >= best_dist:
            break
        expansions += 1
        if node.children:
            for child in node.children:
                heapq.heappush(frontier, (d_minus_point(x, child.box), child.id, child))
        else:
            d = leaf_distance(tree, node, x)
            if d < best_dist:
                best_dist = d
                best = node
    return SearchResult(best, best_dist, expansions)


def nearest_neighbor_beam(tree: ClusterTree, x, width: int) -> SearchResult:
    """Approximate nearest-neighbor leaf via level-synchronous beam search.

    Descends from the root keeping at each depth the ``width`` nodes with
    the smallest lower bound; every leaf encountered on the way is scored
    exactly and the best one is returned.  With width at least the number
    of leaves this visits everything and matches the exact search.
    """
    if width < 1:
        raise ValueError("beam width must be >= 1")
    x = _as_query(tree, x)
    best: Node | None = None
    best_dist = float("inf")
    expansions = 0
    level = [tree.root]
    while level:
        nxt: list[Node] = []
        for node in level:
            expansions += 1
            if node.children:
                nxt.extend(node.children)
            else:
                d = leaf_distance(tree, node, x)
                if d < best_dist:
                    best_dist = d
                    best = node
        if len(nxt) > width:
            nxt.sort(key=lambda n: (d_minus_point(x, n.box), n.id))
            nxt = nxt[:width]
        level = nxt
    return SearchResult(best, best_dist, expansions)
