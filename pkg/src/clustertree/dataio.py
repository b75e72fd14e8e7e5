"""Dataset ingestion, stream ordering, and text serialization.

File formats (all tab-separated, full-precision decimal floats so that
round trips are lossless):

* dataset:    ``<point id>  <label or ?>  <x1> ... <xd>`` per line
* tree:       header lines (``dim``, ``nodes``, optional ``name`` rows
              mapping internal integer ids to the dataset's external ids)
              followed by one ``node`` line per tree node
* assignment: ``<point id>  <cluster id>`` per line
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .geometry import BoundingBox
from .tree import ClusterTree, ModeConfig, Node, Point

__all__ = [
    "Dataset",
    "DatasetFormatError",
    "load_dataset",
    "save_dataset",
    "order_stream",
    "serialize_tree",
    "deserialize_tree",
    "read_point_names",
    "attach_points",
    "save_assignment",
    "load_assignment",
]

_TREE_MAGIC = "clustertree-v1"


class DatasetFormatError(ValueError):
    """Malformed dataset/tree/assignment file; message names the line."""


@dataclass
class Dataset:
    """Ordered point collection with a shared dimension.

    ``names`` keeps the external (file) point ids aligned with ``points``;
    internal ids are the 0-based file order.
    """

    points: list[Point]
    dim: int
    name: str = ""
    names: Optional[list[str]] = None

    def external_id(self, point_id: int) -> str:
        if self.names is None:
            return str(point_id)
        return self.names[point_id]


def load_dataset(path) -> Dataset:
    """Parse a dataset TSV; labels of ``?`` mean unlabeled."""
    points: list[Point] = []
    names: list[str] = []
    seen: set[str] = set()
    dim: Optional[int] = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) < 3:
                raise DatasetFormatError(f"{path}:{lineno}: expected id, label and features")
            ext_id, label = cols[0], cols[1]
            if ext_id in seen:
                raise DatasetFormatError(f"{path}:{lineno}: duplicate point id {ext_id!r}")
            seen.add(ext_id)
            try:
                feats = np.array([float(c) for c in cols[2:]])
            except ValueError:
                raise DatasetFormatError(f"{path}:{lineno}: non-numeric feature value") from None
            if dim is None:
                dim = feats.shape[0]
            elif feats.shape[0] != dim:
                raise DatasetFormatError(
                    f"{path}:{lineno}: row has {feats.shape[0]} features, expected {dim}"
                )
            points.append(Point(len(points), feats, None if label == "?" else label))
            names.append(ext_id)
    return Dataset(points=points, dim=dim or 0, name=str(path), names=names)


def save_dataset(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in dataset.points:
            label = "?" if p.label is None else str(p.label)
            feats = "\t".join(repr(float(v)) for v in p.features)
            fh.write(f"{dataset.external_id(p.id)}\t{label}\t{feats}\n")


def order_stream(dataset: Dataset, kind: str, seed: int = 0) -> list[Point]:
    """Permute the dataset for streaming.

    ``given`` keeps file order; ``random`` is a seeded shuffle; ``sorted``
    groups points by class in first-appearance order (stable within a
    class); ``round_robin`` cycles through the classes, emitting the next
    unemitted member of each and skipping exhausted classes.
    """
    points = dataset.points
    if kind == "given":
        return list(points)
    if kind == "random":
        rng = np.random.default_rng(seed)
        return [points[i] for i in rng.permutation(len(points))]
    if kind in ("sorted", "round_robin"):
        if any(p.label is None for p in points):
            raise ValueError(f"{kind} ordering requires every point to be labeled")
        class_order: dict[str, int] = {}
        for p in points:
            class_order.setdefault(p.label, len(class_order))
        if kind == "sorted":
            return sorted(points, key=lambda p: class_order[p.label])
        queues: list[list[Point]] = [[] for _ in class_order]
        for p in points:
            queues[class_order[p.label]].append(p)
        out: list[Point] = []
        cursor = [0] * len(queues)
        while len(out) < len(points):
            for ci, q in enumerate(queues):
                if cursor[ci] < len(q):
                    out.append(q[cursor[ci]])
                    cursor[ci] += 1
        return out
    raise ValueError(f"unknown stream order: {kind!r}")


# ----------------------------------------------------------------------
# tree document


def _fmt_vector(v: np.ndarray) -> str:
    return ",".join(repr(float(x)) for x in v)


def serialize_tree(tree: ClusterTree, point_names: Optional[dict[int, str]] = None) -> str:
    """Render the tree as a text document; see the module docstring.

    Structure, boxes (bit-exact), counts, collapsed flags and payload ids
    round-trip; point features and the runtime mode config do not.
    """
    lines = [_TREE_MAGIC]
    lines.append(f"dim\t{tree.dim if tree.dim is not None else '-'}")
    nodes = list(tree.nodes())
    lines.append(f"nodes\t{len(nodes)}")
    if point_names:
        for pid in sorted(point_names):
            lines.append(f"name\t{pid}\t{point_names[pid]}")
    for node in nodes:
        parent = node.parent.id if node.parent is not None else "-"
        children = ",".join(str(c.id) for c in node.children) if node.children else "-"
        payload = ",".join(str(p) for p in node.point_ids) if node.point_ids else "-"
        lines.append(
            "node\t{id}\t{parent}\t{children}\t{collapsed}\t{count}\t{lo}\t{hi}\t{payload}".format(
                id=node.id,
                parent=parent,
                children=children,
                collapsed=int(node.collapsed),
                count=node.leaf_count,
                lo=_fmt_vector(node.box.lo),
                hi=_fmt_vector(node.box.hi),
                payload=payload,
            )
        )
    return "\n".join(lines) + "\n"


def deserialize_tree(text: str) -> ClusterTree:
    """Rebuild a tree from its document.

    The result has an empty point store (features are not serialized), so
    it supports evaluation and extraction directly; call
    :func:`attach_points` before resuming insertion or exact checks.
    """
    lines = [ln for ln in text.splitlines() if ln]
    if not lines or lines[0] != _TREE_MAGIC:
        raise DatasetFormatError("tree document: missing header line")
    declared_nodes: Optional[int] = None
    nodes: dict[int, Node] = {}
    parents: dict[int, Optional[int]] = {}
    children: dict[int, list[int]] = {}
    dim: Optional[int] = None
    for lineno, line in enumerate(lines[1:], start=2):
        cols = line.split("\t")
        tag = cols[0]
        try:
            if tag == "dim":
                dim = None if cols[1] == "-" else int(cols[1])
            elif tag == "nodes":
                declared_nodes = int(cols[1])
            elif tag == "name":
                continue  # external-id table, read via read_point_names
            elif tag == "node":
                nid = int(cols[1])
                node = Node(nid)
                parents[nid] = None if cols[2] == "-" else int(cols[2])
                children[nid] = [] if cols[3] == "-" else [int(c) for c in cols[3].split(",")]
                node.collapsed = bool(int(cols[4]))
                node.leaf_count = int(cols[5])
                lo = np.array([float(x) for x in cols[6].split(",")])
                hi = np.array([float(x) for x in cols[7].split(",")])
                node.box = BoundingBox(lo, hi)
                node.point_ids = [] if cols[8] == "-" else [int(p) for p in cols[8].split(",")]
                nodes[nid] = node
            else:
                raise DatasetFormatError(f"tree document line {lineno}: unknown record {tag!r}")
        except (IndexError, ValueError) as exc:
            if isinstance(exc, DatasetFormatError):
                raise
            raise DatasetFormatError(f"tree document line {lineno}: {exc}") from None
    if declared_nodes is not None and declared_nodes != len(nodes):
        raise DatasetFormatError(
            f"tree document: declared {declared_nodes} nodes, found {len(nodes)}"
        )
    tree = ClusterTree(ModeConfig())
    tree.dim = dim
    if not nodes:
        return tree
    roots = []
    for nid, node in nodes.items():
        pid = parents[nid]
        if pid is None:
            roots.append(node)
        else:
            node.parent = nodes[pid]
        node.children = [nodes[c] for c in children[nid]]
    if len(roots) != 1:
        raise DatasetFormatError(f"tree document: expected one root, found {len(roots)}")
    tree.root = roots[0]
    tree._next_node_id = max(nodes) + 1
    for node in nodes.values():
        if node.is_leaf():
            tree.num_leaves += 1
            for p in node.point_ids:
                tree._leaf_of[p] = node
    return tree


def read_point_names(text: str) -> dict[int, str]:
    """External-id table from a tree document (empty if absent)."""
    names: dict[int, str] = {}
    for line in text.splitlines():
        if line.startswith("name\t"):
            _, pid, ext = line.split("\t", 2)
            names[int(pid)] = ext
    return names


def attach_points(tree: ClusterTree, points: Iterable[Point]) -> None:
    """Re-attach point features/labels to a deserialized tree.

    The supplied ids must exactly cover the payload ids stored in the
    tree's leaves.
    """
    supplied = {}
    for p in points:
        supplied[p.id] = p
    stored = set(tree._leaf_of)
    if set(supplied) != stored:
        missing = sorted(stored - set(supplied))[:5]
        extra = sorted(set(supplied) - stored)[:5]
        raise ValueError(f"point ids do not match the tree (missing={missing}, extra={extra})")
    dims = {p.features.shape[0] for p in supplied.values()}
    if len(dims) > 1 or (tree.dim is not None and dims and dims != {tree.dim}):
        raise ValueError("attached points disagree with the tree dimension")
    tree.points = supplied
    if tree.dim is None and dims:
        tree.dim = dims.pop()


# ----------------------------------------------------------------------
# flat assignments


def save_assignment(assignment: dict[int, int], path, names: Optional[dict[int, str]] = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pid in sorted(assignment):
            ext = names.get(pid, str(pid)) if names else str(pid)
            fh.write(f"{ext}\t{assignment[pid]}\n")


def load_assignment(path) -> dict[str, int]:
    out: dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 2:
                raise DatasetFormatError(f"{path}:{lineno}: expected point id and cluster id")
            try:
                out[cols[0]] = int(cols[1])
            except ValueError:
                raise DatasetFormatError(f"{path}:{lineno}: cluster id must be an integer") from None
    return out
