"""Axis-aligned bounding boxes and the distance bounds built on them.

Every subtree of the cluster tree is summarized by the smallest box that
contains its points.  Four bounds are derived from these boxes: lower and
upper bounds on the Euclidean distance between a query point and any point
inside a box, and between any two points drawn from two boxes.  The lower
bound drives best-first search, the upper bound drives masking checks and
collapse priorities.

All functions here are pure and never mutate their arguments; distances are
returned un-squared so they compare directly against Euclidean norms.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "BoundingBox",
    "box_from_point",
    "box_extend",
    "box_union",
    "d_minus_point",
    "d_plus_point",
    "d_minus_box",
    "d_plus_box",
]


class BoundingBox:
    """Per-dimension ``[lo, hi]`` interval summary of a point set."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if lo.ndim != 1 or hi.ndim != 1 or lo.shape != hi.shape:
            raise ValueError("lo and hi must be 1-d vectors of equal length")
        if lo.size == 0:
            raise ValueError("bounding box needs at least one dimension")
        if np.any(lo > hi):
            raise ValueError("lo exceeds hi in some dimension")
        self.lo = lo
        self.hi = hi

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.lo <= x) and np.all(x <= self.hi))

    def diagonal(self) -> float:
        """Euclidean length of the box diagonal (0 for a point box)."""
        d = self.hi - self.lo
        return float(np.sqrt(np.dot(d, d)))

    def __eq__(self, other):
        if not isinstance(other, BoundingBox):
            return NotImplemented
        return np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __repr__(self):
        return f"BoundingBox(lo={self.lo.tolist()}, hi={self.hi.tolist()})"


def _raw_box(lo: np.ndarray, hi: np.ndarray) -> BoundingBox:
    # Internal constructor for boxes already known to be valid; skips checks
    # because extend/union run once per ancestor on every insert.
    b = BoundingBox.__new__(BoundingBox)
    b.lo = lo
    b.hi = hi
    return b


def _as_vector(x, dim: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("expected a non-empty 1-d vector")
    if dim is not None and x.shape[0] != dim:
        raise ValueError(f"dimension mismatch: vector has {x.shape[0]}, box has {dim}")
    return x


def box_from_point(x) -> BoundingBox:
    """Degenerate box whose lo and hi both equal ``x``."""
    x = _as_vector(x)
    return _raw_box(x.copy(), x.copy())


def box_extend(b: BoundingBox, x) -> BoundingBox:
    """Smallest box containing ``b`` and the point ``x``."""
    x = _as_vector(x, b.dim)
    return _raw_box(np.minimum(b.lo, x), np.maximum(b.hi, x))


def box_union(a: BoundingBox, b: BoundingBox) -> BoundingBox:
    """Smallest box containing both boxes; commutative, idempotent."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return _raw_box(np.minimum(a.lo, b.lo), np.maximum(a.hi, b.hi))


def d_minus_point(x, b: BoundingBox) -> float:
    """Lower bound on ``||x - y||`` over all points y inside ``b``.

    Exact (zero) when x lies inside the box, and exact for a point box,
    where it degenerates to the plain Euclidean distance.
    """
    x = _as_vector(x, b.dim)
    gap = np.maximum(np.maximum(b.lo - x, x - b.hi), 0.0)
    return float(np.sqrt(np.dot(gap, gap)))


def d_plus_point(x, b: BoundingBox) -> float:
    """Upper bound on ``||x - y||`` over all points y inside ``b``.

    Per dimension the farther of the two interval endpoints is taken.
    """
    x = _as_vector(x, b.dim)
    far = np.maximum(np.abs(x - b.lo), np.abs(b.hi - x))
    return float(np.sqrt(np.dot(far, far)))


def d_minus_box(a: BoundingBox, b: BoundingBox) -> float:
    """Lower bound on ``||x - y||`` over x in ``a``, y in ``b``.

    Uses the per-dimension gap between the two intervals (0 where they
    overlap), which realizes the smallest achievable coordinate-wise
    distance.  Symmetric; zero iff the boxes intersect.
    """
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    gap = np.maximum(np.maximum(b.lo - a.hi, a.lo - b.hi), 0.0)
    return float(np.sqrt(np.dot(gap, gap)))


def d_plus_box(a: BoundingBox, b: BoundingBox) -> float:
    """Upper bound on ``||x - y||`` over x in ``a``, y in ``b``.

    Per dimension the span between opposite extremes dominates, so the
    larger of the two squared end-to-end differences is summed.  Symmetric.
    """
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    m = np.maximum(np.square(a.hi - b.lo), np.square(b.hi - a.lo))
    return float(np.sqrt(np.sum(m)))
