"""The mutable binary cluster tree.

Nodes carry a bounding box and a descendant point count; leaves carry point
ids.  A plain leaf holds exactly one point, a collapsed leaf holds the ids of
every point that was merged into it and is never taken apart again.  The
structural primitives live here: splitting a leaf to admit a new point,
propagating statistics to ancestors, the sibling/aunt rotation, and leaf
collapsing with its priority queue.

Concurrency contract: single writer.  All mutations must be serialized by
the caller; read-only traversals may run concurrently with each other but
never with a mutation.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .geometry import BoundingBox, box_from_point, box_extend, box_union, d_plus_box

__all__ = [
    "Point",
    "Node",
    "ModeConfig",
    "ClusterTree",
    "EmptyTreeError",
]


class EmptyTreeError(ValueError):
    """Raised when an operation requires a non-empty tree."""


@dataclass(frozen=True, eq=False)
class Point:
    """One data item: integer id, feature vector, optional class label.

    The label is evaluation-only metadata and is never read by the
    clustering logic itself.
    """

    id: int
    features: np.ndarray
    label: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "features", np.asarray(self.features, dtype=float))
        if self.features.ndim != 1 or self.features.size == 0:
            raise ValueError("point features must be a non-empty 1-d vector")
        if self.id < 0:
            raise ValueError("point id must be non-negative")


@dataclass(frozen=True)
class ModeConfig:
    """Runtime configuration for tree construction.

    masking_check: "exact" evaluates the masking condition by brute force
        over descendant points; "approx" uses box-to-box bounds only.
    rotations: "none", "masking", or "full" (masking plus balance).
    search: "astar" (exact nearest neighbor) or "beam" (width-limited).
    beam_width: beam width, used only when search == "beam".
    collapse_bound: cap on the number of leaves; enables collapsed mode.
    """

    masking_check: str = "approx"
    rotations: str = "full"
    search: str = "astar"
    beam_width: int = 5
    collapse_bound: Optional[int] = None

    def __post_init__(self):
        if self.masking_check not in ("exact", "approx"):
            raise ValueError(f"unknown masking_check: {self.masking_check!r}")
        if self.rotations not in ("none", "masking", "full"):
            raise ValueError(f"unknown rotations mode: {self.rotations!r}")
        if self.search not in ("astar", "beam"):
            raise ValueError(f"unknown search mode: {self.search!r}")
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")
        if self.collapse_bound is not None and self.collapse_bound < 2:
            raise ValueError("collapse_bound must be >= 2")


class Node:
    """Binary cluster-tree node.

    ``children`` is empty exactly for leaves.  ``leaf_count`` counts
    descendant *points* (not tree leaves), so a collapsed leaf storing five
    ids has leaf_count 5.  ``point_ids`` is the leaf payload: one id for a
    plain leaf, two or more for a collapsed leaf, empty for internal nodes.
    """

    __slots__ = ("id", "parent", "children", "box", "leaf_count", "point_ids", "collapsed")

    def __init__(self, node_id: int):
        self.id = node_id
        self.parent: Optional[Node] = None
        self.children: list[Node] = []
        self.box: Optional[BoundingBox] = None
        self.leaf_count = 0
        self.point_ids: list[int] = []
        self.collapsed = False

    def is_leaf(self) -> bool:
        return not self.children

    def sibling(self) -> Optional["Node"]:
        p = self.parent
        if p is None:
            return None
        return p.children[1] if p.children[0] is self else p.children[0]

    def aunt(self) -> Optional["Node"]:
        p = self.parent
        if p is None:
            return None
        return p.sibling()

    def depth(self) -> int:
        d = 0
        node = self.parent
        while node is not None:
            d += 1
            node = node.parent
        return d

    def ancestors(self) -> Iterator["Node"]:
        node = self.parent
        while node is not None:
            yield node
            node = node.parent

    def subtree(self) -> Iterator["Node"]:
        """Pre-order iterator over this node and all descendants."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def __repr__(self):
        kind = "collapsed" if self.collapsed else ("leaf" if self.is_leaf() else "internal")
        return f"<Node {self.id} {kind} n={self.leaf_count}>"


class ClusterTree:
    """Root, node store, point store, and mode configuration.

    Every inserted point id lives in exactly one leaf payload.  The point
    store retains features even in collapsed mode so that exact masking
    checks and evaluation remain possible; a memory-strict deployment using
    approximate checks only may drop it.
    """

    def __init__(self, config: Optional[ModeConfig] = None):
        self.config = config if config is not None else ModeConfig()
        self.root: Optional[Node] = None
        self.points: dict[int, Point] = {}
        self.dim: Optional[int] = None
        self.num_leaves = 0
        self._next_node_id = 0
        self._leaf_of: dict[int, Node] = {}
        self._collapse_heap: list[tuple[float, int, Node]] = []

    # ------------------------------------------------------------------
    # bookkeeping

    def new_node(self) -> Node:
        node = Node(self._next_node_id)
        self._next_node_id += 1
        return node

    def _register_point(self, point: Point) -> None:
        if point.id in self.points:
            raise ValueError(f"duplicate point id: {point.id}")
        if self.dim is None:
            self.dim = point.features.shape[0]
        elif point.features.shape[0] != self.dim:
            raise ValueError(
                f"dimension mismatch: point has {point.features.shape[0]}, tree has {self.dim}"
            )
        self.points[point.id] = point

    def leaf_of(self, point_id: int) -> Node:
        """The leaf whose payload holds ``point_id``."""
        try:
            return self._leaf_of[point_id]
        except KeyError:
            raise ValueError(f"unknown point id: {point_id}") from None

    @property
    def num_points(self) -> int:
        return len(self._leaf_of)

    def nodes(self) -> Iterator[Node]:
        if self.root is not None:
            yield from self.root.subtree()

    def leaves(self) -> Iterator[Node]:
        for node in self.nodes():
            if node.is_leaf():
                yield node

    def internal_nodes(self) -> Iterator[Node]:
        for node in self.nodes():
            if node.children:
                yield node

    def max_depth(self) -> int:
        """Depth of the deepest leaf (a lone root leaf has depth 0)."""
        if self.root is None:
            return 0
        best = 0
        stack = [(self.root, 0)]
        while stack:
            node, d = stack.pop()
            if node.children:
                for c in node.children:
                    stack.append((c, d + 1))
            elif d > best:
                best = d
        return best

    # ------------------------------------------------------------------
    # structural mutations

    def add_root_leaf(self, point: Point) -> Node:
        """Create the initial single-leaf root; only valid on an empty tree."""
        if self.root is not None:
            raise ValueError("tree already has a root")
        self._register_point(point)
        leaf = self.new_node()
        leaf.point_ids = [point.id]
        leaf.box = box_from_point(point.features)
        leaf.leaf_count = 1
        self.root = leaf
        self.num_leaves = 1
        self._leaf_of[point.id] = leaf
        return leaf

    def split(self, leaf: Node, point: Point, allow_collapsed: bool = False) -> Node:
        """Give ``leaf`` a new sibling holding ``point``.

        A new internal node takes leaf's place; its children are the old
        leaf and a fresh leaf storing the point.  The new parent's box and
        count account for the new point; ancestors above it do not and must
        be updated separately (see :meth:`update_ancestors`).

        Collapsed payloads are never divided; by default splitting a
        collapsed leaf is an error.  The insertion path passes
        ``allow_collapsed=True`` to attach the new point as a sibling of the
        collapsed leaf, which leaves the payload intact.
        """
        if leaf.children:
            raise ValueError("split target must be a leaf")
        if leaf.collapsed and not allow_collapsed:
            raise ValueError("cannot split a collapsed leaf")
        self._register_point(point)

        parent = self.new_node()
        new_leaf = self.new_node()
        new_leaf.point_ids = [point.id]
        new_leaf.box = box_from_point(point.features)
        new_leaf.leaf_count = 1

        old_parent = leaf.parent
        parent.children = [leaf, new_leaf]
        leaf.parent = parent
        new_leaf.parent = parent
        parent.box = box_union(leaf.box, new_leaf.box)
        parent.leaf_count = leaf.leaf_count + 1

        if old_parent is None:
            self.root = parent
        else:
            old_parent.children[old_parent.children.index(leaf)] = parent
            parent.parent = old_parent

        self.num_leaves += 1
        self._leaf_of[point.id] = new_leaf
        self._mark_collapsible(parent)
        return new_leaf

    def update_ancestors(self, node: Node, point: Point) -> None:
        """Extend every strict ancestor's box by the point and bump its count.

        The insertion path calls this on the new leaf's parent, whose own
        statistics were already set by :meth:`split`; calling it on the new
        leaf itself would count the point twice at that parent.
        """
        anc = node.parent
        while anc is not None:
            anc.box = box_extend(anc.box, point.features)
            anc.leaf_count += 1
            anc = anc.parent

    def rotate(self, v: Node) -> None:
        """Exchange v's sibling with v's aunt.

        After the swap v's parent p has children {v, aunt} and the
        grandparent has {p, former sibling}; p's box and count are
        recomputed, the grandparent's stay valid because its descendant set
        is unchanged.
        """
        p = v.parent
        if p is None or p.parent is None:
            raise ValueError("rotate requires the node to have an aunt")
        g = p.parent
        vi = p.children.index(v)
        sib = p.children[1 - vi]
        gi = g.children.index(p)
        aunt = g.children[1 - gi]

        p.children[1 - vi] = aunt
        aunt.parent = p
        g.children[1 - gi] = sib
        sib.parent = g

        p.box = box_union(v.box, aunt.box)
        p.leaf_count = v.leaf_count + aunt.leaf_count
        self._mark_collapsible(p)

    def collapse(self, v: Node) -> None:
        """Merge v's two leaf children into v, making v a collapsed leaf.

        v keeps its box and count; the children are detached.  The payload
        is the concatenation of the children's payloads, so collapsing works
        on plain and previously collapsed leaves alike.
        """
        if not v.children:
            raise ValueError("collapse target must be an internal node")
        c0, c1 = v.children
        if c0.children or c1.children:
            raise ValueError("collapse requires both children to be leaves")
        v.point_ids = c0.point_ids + c1.point_ids
        v.children = []
        v.collapsed = True
        c0.parent = None
        c1.parent = None
        for pid in v.point_ids:
            self._leaf_of[pid] = v
        self.num_leaves -= 1
        p = v.parent
        if p is not None and v.sibling().is_leaf():
            self._mark_collapsible(p)

    # ------------------------------------------------------------------
    # collapsed mode

    def _is_collapsible(self, node: Node) -> bool:
        return bool(node.children) and node.children[0].is_leaf() and node.children[1].is_leaf()

    def _collapse_priority(self, node: Node) -> float:
        return d_plus_box(node.children[0].box, node.children[1].box)

    def _mark_collapsible(self, node: Node) -> None:
        if self.config.collapse_bound is None:
            return
        if self._is_collapsible(node):
            heapq.heappush(self._collapse_heap, (self._collapse_priority(node), node.id, node))

    def try_collapse(self) -> None:
        """Collapse lowest-priority nodes until the leaf bound is met.

        Priority of a collapsible node is the upper distance bound between
        its children's boxes, so the tightest sibling pair merges first.
        Stale heap entries (nodes rotated or already collapsed) are
        discarded lazily; entries whose priority no longer matches the
        node's current children are re-queued at the fresh value.
        """
        bound = self.config.collapse_bound
        if bound is None:
            return
        heap = self._collapse_heap
        while self.num_leaves > bound:
            if not heap:
                self._rebuild_collapse_heap()
                if not heap:
                    raise RuntimeError("no collapsible node found below the leaf bound")
            prio, _, node = heapq.heappop(heap)
            if not self._is_collapsible(node):
                continue
            current = self._collapse_priority(node)
            if current != prio:
                heapq.heappush(heap, (current, node.id, node))
                continue
            self.collapse(node)

    def _rebuild_collapse_heap(self) -> None:
        # Safety net: eager marking should keep the heap populated.
        entries = [
            (self._collapse_priority(n), n.id, n)
            for n in self.internal_nodes()
            if self._is_collapsible(n)
        ]
        heapq.heapify(entries)
        self._collapse_heap[:] = entries

    # ------------------------------------------------------------------
    # structural audit

    def audit(self) -> None:
        """Verify every structural invariant; raises AssertionError on failure.

        Intended for tests, which run it after mutations.  Checks binary
        shape, link symmetry, box tightness bottom-up, point-count
        consistency, unique payload placement, and the collapsed-mode leaf
        bound.
        """
        if self.root is None:
            assert self.num_leaves == 0 and not self._leaf_of, "empty tree with stale counts"
            return
        assert self.root.parent is None, "root has a parent"
        seen_points: set[int] = set()
        leaf_total = 0
        for node in self.nodes():
            if node.children:
                assert len(node.children) == 2, f"node {node.id} has {len(node.children)} children"
                assert not node.point_ids, f"internal node {node.id} carries a payload"
                assert not node.collapsed, f"internal node {node.id} marked collapsed"
                for c in node.children:
                    assert c.parent is node, f"broken parent link under node {node.id}"
                assert node.leaf_count == sum(c.leaf_count for c in node.children), (
                    f"leaf_count mismatch at node {node.id}"
                )
                expected = box_union(node.children[0].box, node.children[1].box)
                assert node.box == expected, f"box not tight at node {node.id}"
            else:
                leaf_total += 1
                if node.collapsed:
                    assert len(node.point_ids) >= 2, f"collapsed leaf {node.id} holds < 2 points"
                else:
                    assert len(node.point_ids) == 1, f"plain leaf {node.id} payload size != 1"
                assert node.leaf_count == len(node.point_ids), (
                    f"leaf_count mismatch at leaf {node.id}"
                )
                for pid in node.point_ids:
                    assert pid not in seen_points, f"point {pid} stored in two leaves"
                    seen_points.add(pid)
                    assert self._leaf_of.get(pid) is node, f"leaf index stale for point {pid}"
                    pt = self.points.get(pid)
                    if pt is not None:
                        assert node.box.contains(pt.features), (
                            f"leaf {node.id} box misses point {pid}"
                        )
        assert leaf_total == self.num_leaves, "num_leaves out of sync"
        assert seen_points == set(self._leaf_of), "leaf index covers wrong ids"
        if self.config.collapse_bound is not None:
            assert self.num_leaves <= self.config.collapse_bound, "leaf bound exceeded"
