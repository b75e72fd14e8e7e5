"""Evaluation: dendrogram purity (exact and Monte Carlo), pairwise F1,
and a separable-dataset generator with its brute-force verifier.

Dendrogram purity is the expected purity of the least-common-ancestor's
descendant set over uniformly sampled same-class point pairs; 1.0 means
every ground-truth class appears as a pure subtree.  The exact value is
computed in one bottom-up pass from per-node class counts, which averages
over all pairs at once; the Monte Carlo estimator samples pairs explicitly
and is meant for trees where enumerating pairs is too expensive.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Optional

import numpy as np
from scipy.spatial.distance import cdist

from .dataio import Dataset
from .extraction import FlatClustering
from .tree import ClusterTree, Node, Point

__all__ = [
    "GroundTruth",
    "EvalReport",
    "UndefinedMetricError",
    "lca",
    "purity",
    "dendrogram_purity_exact",
    "dendrogram_purity_mc",
    "pairwise_f1",
    "generate_separable",
    "verify_separable",
]


class UndefinedMetricError(ValueError):
    """Raised when a metric has no defined value (e.g. no same-class pairs)."""


@dataclass
class GroundTruth:
    """Reference clustering: point id -> class tag."""

    assignment: dict[int, Hashable]

    @property
    def k(self) -> int:
        return len(set(self.assignment.values()))

    def classes(self) -> dict[Hashable, list[int]]:
        """Members per class, classes in first-appearance order."""
        out: dict[Hashable, list[int]] = {}
        for pid, tag in self.assignment.items():
            out.setdefault(tag, []).append(pid)
        return out

    @classmethod
    def from_dataset(cls, dataset: Dataset) -> "GroundTruth":
        """Ground truth over the labeled points of a dataset."""
        return cls({p.id: p.label for p in dataset.points if p.label is not None})


@dataclass
class EvalReport:
    """Bundle of evaluation results for one tree (and optional flat clustering)."""

    dendrogram_purity: float
    tree_balance: float
    max_depth: int
    n: int
    seconds: float = 0.0
    precision: Optional[float] = None
    recall: Optional[float] = None
    f1: Optional[float] = None


def lca(tree: ClusterTree, i: int, j: int) -> Node:
    """Deepest node whose descendant point set contains both points.

    Two points stored in the same collapsed leaf have that leaf as their
    least common ancestor.
    """
    if i == j:
        raise ValueError("lca requires two distinct point ids")
    a = tree.leaf_of(i)
    b = tree.leaf_of(j)
    da = a.depth()
    db = b.depth()
    while da > db:
        a = a.parent
        da -= 1
    while db > da:
        b = b.parent
        db -= 1
    while a is not b:
        a = a.parent
        b = b.parent
    return a


def purity(s1: set, s2: set) -> float:
    """|s1 ∩ s2| / |s1|."""
    if not s1:
        raise ValueError("purity is undefined for an empty first set")
    return len(s1 & s2) / len(s1)


def _class_indexing(tree: ClusterTree, gt: GroundTruth) -> tuple[dict[Hashable, int], np.ndarray]:
    """Map class tags to indices and count class sizes; validates ids."""
    index: dict[Hashable, int] = {}
    for pid, tag in gt.assignment.items():
        tree.leaf_of(pid)  # raises on unknown ids
        index.setdefault(tag, len(index))
    sizes = np.zeros(len(index))
    for tag in gt.assignment.values():
        sizes[index[tag]] += 1
    return index, sizes


def _leaf_class_vector(node: Node, gt: GroundTruth, index: dict, k: int) -> np.ndarray:
    vec = np.zeros(k)
    for pid in node.point_ids:
        tag = gt.assignment.get(pid)
        if tag is not None:
            vec[index[tag]] += 1
    return vec


def dendrogram_purity_exact(tree: ClusterTree, gt: GroundTruth) -> float:
    """Exact dendrogram purity, averaged over all unordered same-class pairs.

    One post-order pass computes per-node class counts; pairs whose LCA is
    a given internal node are the cross pairs between its children, and
    pairs inside a collapsed leaf have the leaf itself as LCA.  Unlabeled
    points never form pairs but still dilute purity denominators.
    """
    index, sizes = _class_indexing(tree, gt)
    pair_total = float(np.sum(sizes * (sizes - 1) / 2))
    if pair_total == 0:
        raise UndefinedMetricError("no class has two points; dendrogram purity is undefined")
    k = len(index)
    total = 0.0
    counts: dict[int, np.ndarray] = {}
    stack: list[tuple[Node, bool]] = [(tree.root, False)]
    while stack:
        node, ready = stack.pop()
        if node.children and not ready:
            stack.append((node, True))
            stack.append((node.children[0], False))
            stack.append((node.children[1], False))
            continue
        if node.children:
            left = counts.pop(node.children[0].id)
            right = counts.pop(node.children[1].id)
            vec = left + right
            total += float(np.dot(left * right, vec)) / node.leaf_count
        else:
            vec = _leaf_class_vector(node, gt, index, k)
            if node.collapsed:
                inner_pairs = vec * (vec - 1) / 2
                total += float(np.dot(inner_pairs, vec)) / node.leaf_count
        counts[node.id] = vec
    return total / pair_total


def dendrogram_purity_mc(tree: ClusterTree, gt: GroundTruth, m: int, seed: int = 0) -> float:
    """Monte Carlo dendrogram purity from m sampled same-class pairs.

    Sampling is two-stage to be uniform over the pair set without
    materializing it: a class is drawn with probability proportional to its
    pair count, then an unordered pair uniformly within the class.
    Deterministic for a fixed seed.
    """
    if m < 1:
        raise ValueError("sample count must be >= 1")
    index, sizes = _class_indexing(tree, gt)
    by_class = [np.array(ids) for ids in _members_by_index(gt, index).values()]
    pair_counts = sizes * (sizes - 1) / 2
    pair_total = float(pair_counts.sum())
    if pair_total == 0:
        raise UndefinedMetricError("no class has two points; dendrogram purity is undefined")

    # Per-node class counts, depths, and leaf lookups for fast pair scoring.
    k = len(index)
    counts: dict[int, np.ndarray] = {}
    for node in _post_order(tree.root):
        if node.children:
            counts[node.id] = counts[node.children[0].id] + counts[node.children[1].id]
        else:
            counts[node.id] = _leaf_class_vector(node, gt, index, k)
    depths = {node.id: 0 for node in [tree.root]}
    for node in tree.nodes():
        for child in node.children:
            depths[child.id] = depths[node.id] + 1

    rng = np.random.default_rng(seed)
    draws = rng.choice(k, size=m, p=pair_counts / pair_total)
    total = 0.0
    for ci in range(k):
        n_draws = int(np.sum(draws == ci))
        if n_draws == 0:
            continue
        members = by_class[ci]
        n = len(members)
        u = rng.integers(0, n, size=n_draws)
        w = rng.integers(0, n - 1, size=n_draws)
        w = w + (w >= u)
        for a, b in zip(members[u], members[w]):
            node = _lca_walk(tree.leaf_of(int(a)), tree.leaf_of(int(b)), depths)
            total += counts[node.id][ci] / node.leaf_count
    return total / m


def _members_by_index(gt: GroundTruth, index: dict) -> dict[int, list[int]]:
    out: dict[int, list[int]] = {i: [] for i in range(len(index))}
    for pid, tag in gt.assignment.items():
        out[index[tag]].append(pid)
    return out


def _post_order(root: Node):
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, ready = stack.pop()
        if node.children and not ready:
            stack.append((node, True))
            stack.append((node.children[0], False))
            stack.append((node.children[1], False))
            continue
        yield node


def _lca_walk(a: Node, b: Node, depths: dict[int, int]) -> Node:
    da = depths[a.id]
    db = depths[b.id]
    while da > db:
        a = a.parent
        da -= 1
    while db > da:
        b = b.parent
        db -= 1
    while a is not b:
        a = a.parent
        b = b.parent
    return a


def pairwise_f1(pred: FlatClustering, gt: GroundTruth) -> tuple[float, float, float]:
    """Precision, recall, and F1 over same-cluster point pairs.

    Computed from the class/cluster contingency table, never by enumerating
    pairs.  Precision is 0 when the prediction has no pairs and recall is 0
    when the ground truth has none.
    """
    if set(pred.assignment) != set(gt.assignment):
        raise ValueError("prediction and ground truth must cover the same point ids")
    joint: dict[tuple, int] = {}
    pred_sizes: dict[int, int] = {}
    true_sizes: dict[Hashable, int] = {}
    for pid, cluster in pred.assignment.items():
        tag = gt.assignment[pid]
        joint[(cluster, tag)] = joint.get((cluster, tag), 0) + 1
        pred_sizes[cluster] = pred_sizes.get(cluster, 0) + 1
        true_sizes[tag] = true_sizes.get(tag, 0) + 1
    both = sum(n * (n - 1) // 2 for n in joint.values())
    pred_pairs = sum(n * (n - 1) // 2 for n in pred_sizes.values())
    true_pairs = sum(n * (n - 1) // 2 for n in true_sizes.values())
    precision = both / pred_pairs if pred_pairs else 0.0
    recall = both / true_pairs if true_pairs else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def verify_separable(dataset: Dataset, gt: GroundTruth) -> bool:
    """Brute-force separability check.

    True iff the largest within-class distance is strictly smaller than the
    smallest between-class distance, over the labeled points.  With no
    between-class pairs the minimum is taken as +inf (trivially separable).
    """
    pts = [p for p in dataset.points if p.id in gt.assignment]
    if len(pts) < 2:
        return True
    feats = np.array([p.features for p in pts])
    tags = [gt.assignment[p.id] for p in pts]
    dist = cdist(feats, feats)
    same = np.equal.outer(np.array(tags, dtype=object), np.array(tags, dtype=object))
    off_diag = ~np.eye(len(pts), dtype=bool)
    intra = dist[same & off_diag]
    inter = dist[~same]
    intra_max = intra.max() if intra.size else -np.inf
    inter_min = inter.min() if inter.size else np.inf
    return bool(intra_max < inter_min)


def generate_separable(
    k: int,
    n_per_cluster: int,
    d: int,
    margin: float = 2.0,
    seed: int = 0,
) -> tuple[Dataset, GroundTruth]:
    """Random dataset of k unit-radius clusters, guaranteed separable.

    Cluster centers are rejection-sampled so every pair is at least
    3 * margin apart (margin > 1), then points are drawn uniformly from
    unit balls around them.  The output is checked with
    :func:`verify_separable` before being returned; deterministic per seed.
    """
    if k < 1 or n_per_cluster < 1 or d < 1:
        raise ValueError("k, n_per_cluster and d must all be >= 1")
    if margin <= 1.0:
        raise ValueError("margin must be > 1")
    rng = np.random.default_rng(seed)
    gap = 3.0 * margin
    for _ in range(5):
        centers = _spread_centers(rng, k, d, gap)
        points = []
        pid = 0
        for ci in range(k):
            direction = rng.standard_normal((n_per_cluster, d))
            norms = np.linalg.norm(direction, axis=1, keepdims=True)
            norms[norms == 0] = 1.0
            radii = rng.random((n_per_cluster, 1)) ** (1.0 / d)
            feats = centers[ci] + direction / norms * radii
            for row in feats:
                points.append(Point(pid, row, label=str(ci)))
                pid += 1
        dataset = Dataset(points=points, dim=d, name=f"separable-k{k}-n{n_per_cluster}-d{d}-s{seed}")
        gt = GroundTruth.from_dataset(dataset)
        if verify_separable(dataset, gt):
            return dataset, gt
    raise RuntimeError("failed to generate a separable dataset within the retry budget")


def _spread_centers(rng: np.random.Generator, k: int, d: int, gap: float) -> np.ndarray:
    """Rejection-sample k centers pairwise at least gap apart.

    The sampling cube grows until placement succeeds, so this terminates
    for any k.
    """
    side = gap * (2.0 * k ** (1.0 / d) + 2.0)
    while True:
        centers: list[np.ndarray] = []
        budget = 200 * k
        while len(centers) < k and budget > 0:
            budget -= 1
            c = rng.random(d) * side
            if all(float(np.linalg.norm(c - e)) >= gap for e in centers):
                centers.append(c)
        if len(centers) == k:
            return np.array(centers)
        side *= 2.0
