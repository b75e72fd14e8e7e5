"""Flat clustering extraction by greedy cost-based pruning.

To get exactly K clusters out of a cluster tree, internal nodes are
repeatedly merged into single leaves, cheapest first, where the cost of a
node is its bounding-box diagonal times its point count (an upper bound on
the k-means cost of treating the node as one cluster).  The chosen nodes
form a tree-consistent partition: every output cluster is the full point
set of some node of the input tree.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from .tree import ClusterTree, Node

__all__ = ["FlatClustering", "node_cost", "extract_flat"]


@dataclass
class FlatClustering:
    """Assignment of every point id to a cluster id in 0..k-1."""

    assignment: dict[int, int]
    k: int


def node_cost(v: Node) -> float:
    """Bounding-box diagonal length times descendant point count."""
    return v.box.diagonal() * v.leaf_count


def extract_flat(tree: ClusterTree, k: int) -> FlatClustering:
    """Prune a working copy of the tree down to exactly k leaves.

    The input tree is never modified; the pruning is simulated on id sets.
    Merging a node removes its whole subtree from further consideration.
    Candidates are all internal nodes; because a nested node never costs
    more than its ancestor, merges almost always consume exactly two
    current leaves.  The one exception is a zero-diagonal tie (duplicate
    points), where merging the popped node would overshoot below k; such
    nodes are deferred so the loop always lands on exactly k.
    """
    if tree.root is None:
        raise ValueError("cannot extract from an empty tree")
    if not 1 <= k <= tree.num_leaves:
        raise ValueError(f"k must be between 1 and {tree.num_leaves}, got {k}")

    heap = [(node_cost(v), v.id, v) for v in tree.internal_nodes()]
    heapq.heapify(heap)
    removed: set[int] = set()   # nodes swallowed by a merge
    merged: set[int] = set()    # nodes acting as leaves of the working tree
    current = tree.num_leaves
    deferred: list[tuple[float, int, Node]] = []
    progressed = True
    while current > k:
        if not heap:
            if not deferred or not progressed:
                raise RuntimeError("extraction cannot reach the requested cluster count")
            heap, deferred = deferred, []
            heapq.heapify(heap)
            progressed = False
        entry = heapq.heappop(heap)
        node = entry[2]
        if node.id in removed:
            continue
        swallowed = _swallow_count(node, merged)
        if current - (swallowed - 1) < k:
            deferred.append(entry)
            continue
        _mark_removed(node, removed, merged)
        merged.add(node.id)
        current -= swallowed - 1
        progressed = True

    clusters = _working_leaves(tree, merged)
    assert len(clusters) == k
    assignment: dict[int, int] = {}
    for cluster_id, node in enumerate(clusters):
        for pid in _point_ids_under(node):
            assignment[pid] = cluster_id
    return FlatClustering(assignment=assignment, k=k)


def _swallow_count(node: Node, merged: set[int]) -> int:
    """Number of working-tree leaves currently under ``node``."""
    count = 0
    stack = list(node.children)
    while stack:
        n = stack.pop()
        if n.id in merged or not n.children:
            count += 1
        else:
            stack.extend(n.children)
    return count


def _mark_removed(node: Node, removed: set[int], merged: set[int]) -> None:
    stack = list(node.children)
    while stack:
        n = stack.pop()
        removed.add(n.id)
        merged.discard(n.id)
        stack.extend(n.children)


def _working_leaves(tree: ClusterTree, merged: set[int]) -> list[Node]:
    """Leaves of the pruned tree in stable pre-order."""
    out = []
    stack = [tree.root]
    while stack:
        node = stack.pop()
        if node.id in merged or not node.children:
            out.append(node)
        else:
            stack.extend(reversed(node.children))
    return out


def _point_ids_under(node: Node) -> list[int]:
    ids = []
    stack = [node]
    while stack:
        n = stack.pop()
        if n.children:
            stack.extend(n.children)
        else:
            ids.extend(n.point_ids)
    return ids
