"""Metrics, boxes and box covers with exact rational bounds.

Every coordinate is stored as a :class:`fractions.Fraction`.  Floats handed in
by callers are read as their shortest round-trip decimal (``0.1`` means 1/10),
which is also how they are written back out.  Under the ``linf`` and
``weighted_linf`` metrics all distances below are exact; under ``l2`` they are
one-sided rational bounds around the square root.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "Box",
    "BoxCover",
    "GeometryError",
    "Metric",
    "as_point",
    "as_rational",
    "cover_min_distance",
    "diameter",
    "dist_point_to_cover",
    "hausdorff",
    "metric_dist",
    "q_to_float_down",
    "q_to_float_up",
]

_LINF_KINDS = ("linf", "weighted_linf")


class GeometryError(ValueError):
    """Bad geometric input: dimension mismatch, empty cover, bad tolerance."""


def as_rational(x) -> Fraction:
    """Convert a number (or numeric string) to an exact Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (bool, np.bool_)):
        raise TypeError("booleans are not coordinates")
    if isinstance(x, (int, np.integer, Rational)):
        return Fraction(int(x)) if isinstance(x, np.integer) else Fraction(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            raise GeometryError(f"non-finite coordinate {x!r}")
        return Fraction(repr(x))
    if isinstance(x, Decimal):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot read {x!r} as a real number")


def as_point(p) -> tuple[Fraction, ...]:
    if isinstance(p, (int, float, Fraction, np.number, str)):
        p = (p,)
    pt = tuple(as_rational(c) for c in p)
    if not pt:
        raise GeometryError("points need at least one coordinate")
    return pt


def q_to_float_down(q: Fraction) -> float:
    """Largest float that is <= q."""
    f = float(q)
    if Fraction(f) > q:
        f = math.nextafter(f, -math.inf)
    return f


def q_to_float_up(q: Fraction) -> float:
    f = float(q)
    if Fraction(f) < q:
        f = math.nextafter(f, math.inf)
    return f


def _sqrt_down(q: Fraction) -> Fraction:
    if q <= 0:
        return Fraction(0)
    f = math.sqrt(float(q))
    r = Fraction(f)
    while r * r > q:
        f = math.nextafter(f, 0.0)
        r = Fraction(f)
    return r


def _sqrt_up(q: Fraction) -> Fraction:
    if q <= 0:
        return Fraction(0)
    f = math.sqrt(float(q))
    r = Fraction(f)
    while r * r < q:
        f = math.nextafter(f, math.inf)
        r = Fraction(f)
    return r


@dataclass(frozen=True)
class Metric:
    """One of the supported metrics on R^n.

    ``weighted_linf`` is ``max_a w_a |x_a - y_a|`` with strictly positive weights.
    """

    kind: str = "linf"
    weights: tuple[Fraction, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("linf", "weighted_linf", "l2"):
            raise GeometryError(f"unknown metric kind {self.kind!r}")
        if self.kind == "weighted_linf":
            if not self.weights:
                raise GeometryError("weighted_linf needs weights")
            w = tuple(as_rational(x) for x in self.weights)
            if any(x <= 0 for x in w):
                raise GeometryError("metric weights must be strictly positive")
            object.__setattr__(self, "weights", w)
        elif self.weights is not None:
            raise GeometryError(f"{self.kind} takes no weights")

    @classmethod
    def linf(cls) -> Metric:
        return cls("linf")

    @classmethod
    def l2(cls) -> Metric:
        return cls("l2")

    @classmethod
    def weighted(cls, weights: Sequence) -> Metric:
        return cls("weighted_linf", tuple(weights))

    @property
    def is_linf_type(self) -> bool:
        return self.kind in _LINF_KINDS

    def weight(self, axis: int) -> Fraction:
        return self.weights[axis] if self.kind == "weighted_linf" else Fraction(1)

    def check_dim(self, n: int) -> None:
        if self.kind == "weighted_linf" and len(self.weights) != n:
            raise GeometryError(f"metric has {len(self.weights)} weights, space has dimension {n}")

    def norm_bounds(self, diffs: Sequence[Fraction]) -> tuple[Fraction, Fraction]:
        """(lower, upper) rational bounds on the norm of a difference vector."""
        if self.kind == "l2":
            sq = sum((d * d for d in diffs), Fraction(0))
            return _sqrt_down(sq), _sqrt_up(sq)
        v = max(abs(d) * self.weight(a) for a, d in enumerate(diffs))
        return v, v

    def norm_float(self, diffs: np.ndarray) -> np.ndarray:
        """Float norm along the last axis (simulation paths only)."""
        diffs = np.asarray(diffs, dtype=float)
        if self.kind == "l2":
            return np.sqrt(np.sum(diffs * diffs, axis=-1))
        if self.kind == "weighted_linf":
            w = np.array([float(x) for x in self.weights])
            return np.max(np.abs(diffs) * w, axis=-1)
        return np.max(np.abs(diffs), axis=-1)


@dataclass(frozen=True, order=True)
class Box:
    """Axis-aligned closed box ``[lo, hi]``; empty iff some ``lo > hi``."""

    lo: tuple[Fraction, ...]
    hi: tuple[Fraction, ...]

    def __post_init__(self):
        lo = as_point(self.lo)
        hi = as_point(self.hi)
        if len(lo) != len(hi):
            raise GeometryError("box bounds have different lengths")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, p) -> Box:
        p = as_point(p)
        return cls(p, p)

    @classmethod
    def empty(cls, n: int) -> Box:
        return cls((1,) * n, (0,) * n)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def is_empty(self) -> bool:
        return any(l > h for l, h in zip(self.lo, self.hi))

    @property
    def widths(self) -> tuple[Fraction, ...]:
        return tuple(h - l for l, h in zip(self.lo, self.hi))

    @property
    def center(self) -> tuple[Fraction, ...]:
        return tuple((l + h) / 2 for l, h in zip(self.lo, self.hi))

    def is_degenerate(self) -> bool:
        return any(l == h for l, h in zip(self.lo, self.hi))

    def contains(self, p) -> bool:
        return all(l <= x <= h for l, x, h in zip(self.lo, p, self.hi))

    def contains_box(self, other: Box) -> bool:
        return all(
            l <= ol and oh <= h for l, h, ol, oh in zip(self.lo, self.hi, other.lo, other.hi)
        )

    def intersect(self, other: Box) -> Box:
        return Box(
            tuple(max(a, b) for a, b in zip(self.lo, other.lo)),
            tuple(min(a, b) for a, b in zip(self.hi, other.hi)),
        )

    def intersects(self, other: Box) -> bool:
        return all(
            max(a, b) <= min(c, d) for a, b, c, d in zip(self.lo, other.lo, self.hi, other.hi)
        )

    def hull(self, other: Box) -> Box:
        return Box(
            tuple(min(a, b) for a, b in zip(self.lo, other.lo)),
            tuple(max(a, b) for a, b in zip(self.hi, other.hi)),
        )

    def inflate(self, radii: Sequence[Fraction]) -> Box:
        return Box(
            tuple(l - r for l, r in zip(self.lo, radii)),
            tuple(h + r for h, r in zip(self.hi, radii)),
        )

    def clip(self, other: Box) -> Box:
        return self.intersect(other)

    def interior_contains_box(self, other: Box) -> bool:
        """True when ``other`` lies in the open interior of this box."""
        return all(
            l < ol and oh < h for l, h, ol, oh in zip(self.lo, self.hi, other.lo, other.hi)
        )

    def subdivide(self, max_side: Sequence[Fraction]) -> list[Box]:
        """Split into a regular grid whose cells have side <= max_side per axis."""
        counts = []
        for w, s in zip(self.widths, max_side):
            counts.append(1 if w <= s or s <= 0 else math.ceil(w / s))
        if all(c == 1 for c in counts):
            return [self]
        axes = []
        for l, h, c in zip(self.lo, self.hi, counts):
            step = (h - l) / c
            cuts = [l + step * j for j in range(c)] + [h]
            axes.append(list(zip(cuts[:-1], cuts[1:])))
        return [
            Box(tuple(iv[0] for iv in cell), tuple(iv[1] for iv in cell))
            for cell in itertools.product(*axes)
        ]

    def corners(self) -> Iterator[tuple[Fraction, ...]]:
        return itertools.product(*({l, h} for l, h in zip(self.lo, self.hi)))

    def to_float(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.array([float(x) for x in self.lo]), np.array([float(x) for x in self.hi]))


@dataclass(frozen=True)
class BoxCover:
    """Finite union of boxes; empty boxes are dropped on construction."""

    boxes: tuple[Box, ...] = field(default_factory=tuple)

    def __post_init__(self):
        boxes = tuple(b for b in self.boxes if not b.is_empty)
        if len({b.dim for b in boxes}) > 1:
            raise GeometryError("boxes of a cover must share a dimension")
        object.__setattr__(self, "boxes", boxes)

    @classmethod
    def of(cls, *boxes: Box) -> BoxCover:
        return cls(tuple(boxes))

    def __iter__(self) -> Iterator[Box]:
        return iter(self.boxes)

    def __len__(self) -> int:
        return len(self.boxes)

    @property
    def is_empty(self) -> bool:
        return not self.boxes

    @property
    def dim(self) -> int:
        if not self.boxes:
            raise GeometryError("empty cover has no dimension")
        return self.boxes[0].dim

    def canonical(self) -> BoxCover:
        """Sorted, with boxes contained in another box removed."""
        uniq = sorted(set(self.boxes))
        keep = []
        for i, b in enumerate(uniq):
            if not any(j != i and o.contains_box(b) and (o != b) for j, o in enumerate(uniq)):
                keep.append(b)
        return BoxCover(tuple(keep))

    def hull(self) -> Box:
        if not self.boxes:
            raise GeometryError("empty cover")
        h = self.boxes[0]
        for b in self.boxes[1:]:
            h = h.hull(b)
        return h

    def contains(self, p) -> bool:
        p = as_point(p)
        return any(b.contains(p) for b in self.boxes)

    def intersect(self, other: BoxCover) -> BoxCover:
        return BoxCover(tuple(a.intersect(b) for a in self.boxes for b in other.boxes))

    def union(self, other: BoxCover) -> BoxCover:
        return BoxCover(self.boxes + other.boxes)


def _coerce_cover(c) -> BoxCover:
    if isinstance(c, BoxCover):
        return c
    if isinstance(c, Box):
        return BoxCover((c,))
    return BoxCover(tuple(c))


def _axis_gaps(a: Box, b: Box) -> list[Fraction]:
    return [max(Fraction(0), bl - ah, al - bh) for al, ah, bl, bh in zip(a.lo, a.hi, b.lo, b.hi)]


def _box_distance_bounds(a: Box, b: Box, m: Metric) -> tuple[Fraction, Fraction]:
    return m.norm_bounds(_axis_gaps(a, b))


def metric_dist(p, q, m: Metric | None = None) -> Fraction:
    """Distance between two points (exact for linf kinds, rounded sqrt for l2)."""
    m = m or Metric.linf()
    p, q = as_point(p), as_point(q)
    if len(p) != len(q):
        raise GeometryError(f"dimension mismatch: {len(p)} vs {len(q)}")
    m.check_dim(len(p))
    diffs = [a - b for a, b in zip(p, q)]
    if m.kind == "l2":
        return Fraction(math.sqrt(float(sum(d * d for d in diffs))))
    return m.norm_bounds(diffs)[0]


def _check_cover(c: BoxCover, what: str) -> None:
    if c.is_empty:
        raise GeometryError(f"{what} is empty")


def dist_point_to_cover(p, C, m: Metric | None = None) -> Fraction:
    """min over boxes of the clamp distance; exact for linf kinds."""
    m = m or Metric.linf()
    C = _coerce_cover(C)
    _check_cover(C, "cover")
    pb = Box.point(p)
    if pb.dim != C.dim:
        raise GeometryError(f"dimension mismatch: {pb.dim} vs {C.dim}")
    if m.kind == "l2":
        sq = min(sum((g * g for g in _axis_gaps(pb, b)), Fraction(0)) for b in C)
        return Fraction(math.sqrt(float(sq)))
    return min(_box_distance_bounds(pb, b, m)[0] for b in C)


def cover_min_distance(C1, C2, m: Metric | None = None) -> Fraction:
    """Certified lower bound on the distance between two unions of boxes."""
    m = m or Metric.linf()
    C1, C2 = _coerce_cover(C1), _coerce_cover(C2)
    _check_cover(C1, "first cover")
    _check_cover(C2, "second cover")
    if C1.dim != C2.dim:
        raise GeometryError(f"dimension mismatch: {C1.dim} vs {C2.dim}")
    best = None
    for a in C1:
        for b in C2:
            d = _box_distance_bounds(a, b, m)[0]
            if best is None or d < best:
                best = d
                if best == 0:
                    return best
    return best


def diameter(C, m: Metric | None = None) -> Fraction:
    """Upper bound on the diameter of a union of boxes (exact per box pair)."""
    m = m or Metric.linf()
    C = _coerce_cover(C)
    _check_cover(C, "cover")
    boxes = C.boxes
    if len(boxes) > 256:
        boxes = (C.hull(),)
    best = Fraction(0)
    for i, a in enumerate(boxes):
        for b in boxes[i:]:
            spread = [max(bh - al, ah - bl) for al, ah, bl, bh in zip(a.lo, a.hi, b.lo, b.hi)]
            best = max(best, m.norm_bounds(spread)[1])
    return best


def _far_gaps(x: Box, y: Box) -> list[Fraction]:
    """Per-axis gaps from the corner of ``x`` farthest from ``y``."""
    return [max(Fraction(0), yl - xl, xh - yh) for xl, xh, yl, yh in zip(x.lo, x.hi, y.lo, y.hi)]


def _directed_single_linf(x: Box, y: Box, m: Metric) -> Fraction:
    return m.norm_bounds(_far_gaps(x, y))[1]


def _directed_bnb(x: Box, target: BoxCover, m: Metric, delta: Fraction, max_cells: int) -> Fraction:
    """Upper bound on sup_{p in x} dist(p, target), within delta of the truth.

    Best-first branch and bound.  Distance to one box is convex, so its sup
    over a cell sits at a corner: the min over target boxes of those sups is
    the cell's upper bound.  Sampled corners give the lower bound.
    """
    if any(t.contains_box(x) for t in target):
        return Fraction(0)

    def bounds(cell: Box) -> tuple[Fraction, Fraction]:
        hi = min(m.norm_bounds(_far_gaps(cell, t))[1] for t in target)
        if hi == 0:
            return hi, hi
        probes = cell.corners() if cell.dim <= 4 else [cell.center]
        lo = max(min(_box_distance_bounds(Box.point(c), t, m)[0] for t in target) for c in probes)
        return lo, hi

    counter = itertools.count()
    lo, hi = bounds(x)
    best_lower = lo
    heap = [(-hi, next(counter), x)]
    while heap:
        neg_hi, _, cell = heap[0]
        top = -neg_hi
        if top - best_lower <= delta or len(heap) > max_cells:
            return top
        heapq.heappop(heap)
        widths = [w * m.weight(a) for a, w in enumerate(cell.widths)]
        axis = max(range(cell.dim), key=lambda a: widths[a])
        if widths[axis] == 0:
            # a point cell: its bounds are already as tight as the metric allows
            best_lower = max(best_lower, top)
            continue
        mid = (cell.lo[axis] + cell.hi[axis]) / 2
        left = Box(cell.lo, cell.hi[:axis] + (mid,) + cell.hi[axis + 1:])
        right = Box(cell.lo[:axis] + (mid,) + cell.lo[axis + 1:], cell.hi)
        for child in (left, right):
            clo, chi = bounds(child)
            best_lower = max(best_lower, clo)
            if chi > best_lower:
                heapq.heappush(heap, (-chi, next(counter), child))
    return best_lower


def hausdorff(C1, C2, m: Metric | None = None, delta=Fraction(1, 1000), max_cells: int = 200_000) -> Fraction:
    """Upper bound on the Hausdorff distance between two unions of boxes.

    Exact when both covers are single boxes under a linf-type metric; otherwise
    within ``delta`` of the true value.
    """
    m = m or Metric.linf()
    C1, C2 = _coerce_cover(C1), _coerce_cover(C2)
    _check_cover(C1, "first cover")
    _check_cover(C2, "second cover")
    delta = as_rational(delta)
    if delta <= 0:
        raise GeometryError("resolution delta must be positive")
    if C1.dim != C2.dim:
        raise GeometryError(f"dimension mismatch: {C1.dim} vs {C2.dim}")
    if m.is_linf_type and len(C1) == 1 and len(C2) == 1:
        a, b = C1.boxes[0], C2.boxes[0]
        return max(_directed_single_linf(a, b, m), _directed_single_linf(b, a, m))
    best = Fraction(0)
    for src, dst in ((C1, C2), (C2, C1)):
        for x in src:
            best = max(best, _directed_bnb(x, dst, m, delta, max_cells))
    return best


def boxes_from_float(lo: np.ndarray, hi: np.ndarray) -> Box:
    return Box(tuple(as_rational(v) for v in np.atleast_1d(lo)), tuple(as_rational(v) for v in np.atleast_1d(hi)))


def merge_cover(boxes: Iterable[Box]) -> BoxCover:
    """Repeatedly fuse boxes that overlap or touch along one axis into hulls
    when the hull equals their union (collinear, same cross-section)."""
    boxes = sorted(set(b for b in boxes if not b.is_empty))
    changed = True
    while changed:
        changed = False
        out: list[Box] = []
        for b in boxes:
            for i, o in enumerate(out):
                if o.contains_box(b):
                    break
                if b.contains_box(o):
                    out[i] = b
                    break
                diff = [a for a in range(b.dim) if (o.lo[a], o.hi[a]) != (b.lo[a], b.hi[a])]
                if len(diff) == 1:
                    a = diff[0]
                    if max(o.lo[a], b.lo[a]) <= min(o.hi[a], b.hi[a]):
                        out[i] = o.hull(b)
                        changed = True
                        break
            else:
                out.append(b)
        boxes = sorted(set(out))
    return BoxCover(tuple(boxes)).canonical()
