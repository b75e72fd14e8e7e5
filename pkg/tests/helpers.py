"""Shared test utilities: independent oracles and hand-built trees.

The oracles deliberately avoid the library's own aggregation paths: they
enumerate pairs, walk ancestor chains, and scan points directly, so they
can vouch for the optimized implementations.
"""

from __future__ import annotations

import math

import numpy as np

from clustertree.geometry import box_from_point, box_union
from clustertree.tree import ClusterTree, ModeConfig, Node, Point


# ----------------------------------------------------------------------
# independent oracles


def brute_force_nn(features: np.ndarray, query: np.ndarray) -> tuple[int, float]:
    """Index and distance of the nearest row by linear scan."""
    best_i, best_d = -1, math.inf
    for i, row in enumerate(features):
        d = math.sqrt(sum((a - b) ** 2 for a, b in zip(row, query)))
        if d < best_d:
            best_i, best_d = i, d
    return best_i, best_d


def dp_pair_oracle(tree: ClusterTree, labels: dict[int, object]) -> float:
    """Dendrogram purity by literal enumeration of same-class pairs.

    Leaf sets are recomputed by traversal and LCAs found via ancestor-chain
    intersection; nothing is shared with the library's bottom-up pass.
    """
    leaf_by_point: dict[int, Node] = {}
    stack = [tree.root]
    while stack:
        node = stack.pop()
        if node.children:
            stack.extend(node.children)
        else:
            for pid in node.point_ids:
                leaf_by_point[pid] = node

    def descendant_ids(node: Node) -> frozenset:
        ids = []
        todo = [node]
        while todo:
            n = todo.pop()
            if n.children:
                todo.extend(n.children)
            else:
                ids.extend(n.point_ids)
        return frozenset(ids)

    def pair_lca(i: int, j: int) -> Node:
        chain = set()
        node = leaf_by_point[i]
        while node is not None:
            chain.add(id(node))
            node = node.parent
        node = leaf_by_point[j]
        while id(node) not in chain:
            node = node.parent
        return node

    classes: dict[object, list[int]] = {}
    for pid, tag in labels.items():
        classes.setdefault(tag, []).append(pid)

    total = 0.0
    count = 0
    for tag, members in classes.items():
        member_set = set(members)
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                i, j = members[a], members[b]
                leaf_set = descendant_ids(pair_lca(i, j))
                total += len(leaf_set & member_set) / len(leaf_set)
                count += 1
    if count == 0:
        raise ValueError("no same-class pairs")
    return total / count


def f1_pair_oracle(pred: dict[int, int], truth: dict[int, object]) -> tuple[float, float, float]:
    """Pairwise precision/recall/F1 by explicit pair enumeration."""
    ids = sorted(pred)
    pred_pairs = set()
    true_pairs = set()
    for a in range(len(ids)):
        for b in range(a + 1, len(ids)):
            i, j = ids[a], ids[b]
            if pred[i] == pred[j]:
                pred_pairs.add((i, j))
            if truth[i] == truth[j]:
                true_pairs.add((i, j))
    both = len(pred_pairs & true_pairs)
    precision = both / len(pred_pairs) if pred_pairs else 0.0
    recall = both / len(true_pairs) if true_pairs else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def masked_oracle(vs, sibs, aunts) -> bool:
    """Literal masking condition over three point lists (pure python)."""
    for x in vs:
        worst_sib = max(math.dist(x, y) for y in sibs)
        best_aunt = min(math.dist(x, z) for z in aunts)
        if worst_sib > best_aunt:
            return True
    return False


# ----------------------------------------------------------------------
# hand-built trees


def manual_tree(spec, labels=None, config: ModeConfig | None = None) -> ClusterTree:
    """Build a tree from a nested structure without running insert.

    ``spec`` is a 2-tuple for an internal node; a scalar or list/array is a
    leaf's feature vector.  Point ids are assigned 0, 1, ... in left-to-right
    leaf order; ``labels`` (optional) is indexed the same way.
    """
    tree = ClusterTree(config if config is not None else ModeConfig())
    counter = {"pid": 0}

    def build(s) -> Node:
        if isinstance(s, tuple) and len(s) == 2:
            left = build(s[0])
            right = build(s[1])
            node = tree.new_node()
            node.children = [left, right]
            left.parent = node
            right.parent = node
            node.box = box_union(left.box, right.box)
            node.leaf_count = left.leaf_count + right.leaf_count
            return node
        feats = np.atleast_1d(np.asarray(s, dtype=float))
        pid = counter["pid"]
        counter["pid"] += 1
        label = labels[pid] if labels is not None else None
        point = Point(pid, feats, label)
        tree.points[pid] = point
        if tree.dim is None:
            tree.dim = feats.shape[0]
        leaf = tree.new_node()
        leaf.point_ids = [pid]
        leaf.box = box_from_point(feats)
        leaf.leaf_count = 1
        tree._leaf_of[pid] = leaf
        tree.num_leaves += 1
        return leaf

    tree.root = build(spec)
    return tree


def leaf_values(tree: ClusterTree, node: Node) -> list[float]:
    """First feature of every point under a node (for 1-d hand checks)."""
    return sorted(row[0] for row in subtree_features(tree, node))


def subtree_features(tree: ClusterTree, node: Node) -> list[list[float]]:
    """Feature rows of every point under a node."""
    out = []
    stack = [node]
    while stack:
        n = stack.pop()
        if n.children:
            stack.extend(n.children)
        else:
            out.extend(tree.points[p].features.tolist() for p in n.point_ids)
    return out


def chain_spec(rows):
    """Nested 2-tuple chain over a matrix's rows, for manual_tree."""
    spec = rows[0].tolist() if hasattr(rows[0], "tolist") else list(rows[0])
    for row in rows[1:]:
        spec = (spec, row.tolist() if hasattr(row, "tolist") else list(row))
    return spec


def fact_stream_points() -> tuple[list[Point], dict[int, str]]:
    """The 1-d greedy-failure instance: 10 points near -1, 10 near +1
    (one cluster), 20 near +4 (the other), streamed as alternating -1/+1
    points followed by all +4 points."""
    minus = [-1.0 + 0.01 * i for i in range(10)]
    plus = [1.0 + 0.01 * i for i in range(10)]
    far = [4.0 + 0.01 * i for i in range(20)]
    order: list[tuple[float, str]] = []
    for m, p in zip(minus, plus):
        order.append((m, "near"))
        order.append((p, "near"))
    order.extend((f, "far") for f in far)
    points = [Point(i, [v], label) for i, (v, label) in enumerate(order)]
    labels = {p.id: p.label for p in points}
    return points, labels
