"""Masking and balance predicates, the recursive rotation driver, and insert.

A node is *masked* when one of its points is closer to some point under its
aunt than to some point under its sibling, evidence that it sits on the
wrong side of its grandparent.  Masking rotations repair this after every
insertion; balance rotations apply the same swap when it strictly improves
the average local balance and a point-proximity condition keeps it safe.

All checks use strict inequalities; ties never trigger a rotation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np
from scipy.spatial.distance import cdist

from .geometry import d_minus_box, d_plus_box
from .search import nearest_neighbor_astar, nearest_neighbor_beam
from .tree import ClusterTree, ModeConfig, Node, Point

__all__ = [
    "RotationDecision",
    "is_masked_exact",
    "is_masked_approx",
    "check_masked",
    "local_balance",
    "tree_balance",
    "check_balanced",
    "rotate_rec",
    "insert",
    "build_tree",
]

# Optional instrumentation: called as hook(kind, when, tree, node) with
# kind in {"masking", "balance"} and when in {"before", "after"} around
# every applied rotation.
RotationHook = Callable[[str, str, ClusterTree, Node], None]


@dataclass(frozen=True)
class RotationDecision:
    should_rotate: bool
    should_stop: bool


def _features_under(tree: ClusterTree, node: Node) -> np.ndarray:
    """Feature matrix of every point stored below ``node``."""
    rows = []
    stack = [node]
    while stack:
        n = stack.pop()
        if n.children:
            stack.extend(n.children)
        else:
            rows.extend(tree.points[pid].features for pid in n.point_ids)
    return np.array(rows)


def is_masked_exact(tree: ClusterTree, v: Node, sibling: Node, aunt: Node) -> bool:
    """Literal masking test by brute force over the three point sets.

    True iff some point x under v is farther from its farthest sibling
    point than from its nearest aunt point (strict inequality).  Requires
    point features, so it is unavailable after the store is dropped.
    """
    xs = _features_under(tree, v)
    max_to_sibling = cdist(xs, _features_under(tree, sibling)).max(axis=1)
    min_to_aunt = cdist(xs, _features_under(tree, aunt)).min(axis=1)
    return bool(np.any(max_to_sibling > min_to_aunt))


def is_masked_approx(v: Node, sibling: Node, aunt: Node) -> bool:
    """Box-bound masking test, sound but incomplete.

    True only when the lower bound to the sibling box already exceeds the
    upper bound to the aunt box, in which case every point under v is
    provably misplaced and the exact test holds as well.
    """
    return d_minus_box(v.box, sibling.box) > d_plus_box(v.box, aunt.box)


def _masked(tree: ClusterTree, v: Node, sibling: Node, aunt: Node) -> bool:
    if tree.config.masking_check == "exact":
        return is_masked_exact(tree, v, sibling, aunt)
    return is_masked_approx(v, sibling, aunt)


def check_masked(tree: ClusterTree, v: Node) -> RotationDecision:
    """Rotation decision for the masking pass.

    A node without an aunt (the root or a child of the root) cannot be
    masked and stops the pass.  Otherwise the pass continues upward only
    while rotations keep firing.
    """
    p = v.parent
    if p is None or p.parent is None:
        return RotationDecision(False, True)
    masked = _masked(tree, v, v.sibling(), p.sibling())
    return RotationDecision(masked, not masked)


def local_balance(v: Node) -> float:
    """Ratio of the smaller to the larger child point count, in (0, 1]."""
    if not v.children:
        raise ValueError("local balance is defined for internal nodes only")
    a = v.children[0].leaf_count
    b = v.children[1].leaf_count
    return min(a, b) / max(a, b)


def tree_balance(tree: ClusterTree) -> float:
    """Mean local balance over all internal nodes; 1.0 when there are none."""
    total = 0.0
    count = 0
    for node in tree.internal_nodes():
        total += local_balance(node)
        count += 1
    return total / count if count else 1.0


def _balance_gain(v: Node) -> float:
    """Change in summed local balance at parent and grandparent if v rotates.

    Rotating v only alters the local balance of those two nodes (the
    internal-node set and every other leaf partition are unchanged), so the
    sign of this local difference is the sign of the tree-balance change.
    """
    nv = v.leaf_count
    ns = v.sibling().leaf_count
    na = v.parent.sibling().leaf_count
    before = min(nv, ns) / max(nv, ns) + min(nv + ns, na) / max(nv + ns, na)
    after = min(nv, na) / max(nv, na) + min(nv + na, ns) / max(nv + na, ns)
    return after - before


def check_balanced(tree: ClusterTree, v: Node) -> RotationDecision:
    """Rotation decision for the balance pass.

    Rotate only when (1) the swap strictly increases tree balance and
    (2) some point under v is closer to the aunt side than to some sibling
    point, the same condition as masking.  In approximate mode (2) is
    relaxed to the optimistic box form d-(v, aunt) < d+(v, sibling); only
    exact mode inherits the purity guarantee on separable data.  The pass
    always continues to the root.
    """
    p = v.parent
    if p is None:
        return RotationDecision(False, True)
    if p.parent is None:
        return RotationDecision(False, False)
    if _balance_gain(v) <= 0.0:
        return RotationDecision(False, False)
    sibling = v.sibling()
    aunt = p.sibling()
    if tree.config.masking_check == "exact":
        ok = is_masked_exact(tree, v, sibling, aunt)
    else:
        ok = d_minus_box(v.box, aunt.box) < d_plus_box(v.box, sibling.box)
    return RotationDecision(ok, False)


def rotate_rec(
    tree: ClusterTree,
    v: Node,
    predicate: Callable[[ClusterTree, Node], RotationDecision],
    hook: Optional[RotationHook] = None,
    kind: str = "masking",
) -> ClusterTree:
    """Apply the predicate at v, rotate when told to, and walk toward the root.

    Iterative rather than recursive; the walk visits at most depth(v) + 1
    nodes.  Boxes and counts at the rotated parent are recomputed inside
    rotate itself, so each predicate evaluation sees fresh statistics.
    """
    node = v
    while node is not None:
        decision = predicate(tree, node)
        if decision.should_rotate:
            if hook is not None:
                hook(kind, "before", tree, node)
            tree.rotate(node)
            if hook is not None:
                hook(kind, "after", tree, node)
        if decision.should_stop:
            break
        node = node.parent
    return tree


def insert(tree: ClusterTree, point: Point, hook: Optional[RotationHook] = None) -> ClusterTree:
    """Route a point into the tree and repair it.

    In order: nearest-neighbor search (exact or beam per the tree config),
    split of the returned leaf, ancestor statistics update, masking pass
    starting at the nearest-neighbor leaf (the new leaf's sibling), balance
    pass starting at the new leaf's parent, and, in collapsed mode, leaf
    collapsing back under the bound.  The first point becomes a single-leaf
    root.
    """
    if tree.root is None:
        tree.add_root_leaf(point)
        return tree
    if point.id in tree.points:
        raise ValueError(f"duplicate point id: {point.id}")
    if point.features.shape[0] != tree.dim:
        raise ValueError(
            f"dimension mismatch: point has {point.features.shape[0]}, tree has {tree.dim}"
        )

    cfg = tree.config
    if cfg.search == "beam":
        found = nearest_neighbor_beam(tree, point.features, cfg.beam_width)
    else:
        found = nearest_neighbor_astar(tree, point.features)
    target = found.leaf

    new_leaf = tree.split(target, point, allow_collapsed=True)
    tree.update_ancestors(new_leaf.parent, point)

    if cfg.rotations != "none":
        rotate_rec(tree, target, check_masked, hook, kind="masking")
    if cfg.rotations == "full":
        rotate_rec(tree, new_leaf.parent, check_balanced, hook, kind="balance")
    if cfg.collapse_bound is not None:
        tree.try_collapse()
    return tree


def build_tree(
    points: Iterable[Point],
    config: Optional[ModeConfig] = None,
    hook: Optional[RotationHook] = None,
) -> ClusterTree:
    """Insert a stream of points into a fresh tree."""
    tree = ClusterTree(config)
    for point in points:
        insert(tree, point, hook)
    return tree
