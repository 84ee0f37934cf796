"""Box partitions of the ambient box, their separation line and distance."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .geometry import Box, BoxCover, GeometryError, Metric, as_point, hausdorff, merge_cover

__all__ = [
    "InvalidPartition",
    "Partition",
    "Piece",
    "ValidationReport",
    "Violation",
    "partition_distance",
    "separation_line",
    "validate_partition",
]


class InvalidPartition(ValueError):
    def __init__(self, report: ValidationReport):
        super().__init__("invalid partition: " + "; ".join(v.message for v in report.violations))
        self.report = report


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    witness: object = None


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, kind: str, message: str, witness=None) -> None:
        self.violations.append(Violation(kind, message, witness))

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}

    def extend(self, other: ValidationReport) -> None:
        self.violations.extend(other.violations)


@dataclass(frozen=True)
class Piece:
    id: int
    region: BoxCover

    def __post_init__(self):
        if isinstance(self.region, Box):
            object.__setattr__(self, "region", BoxCover((self.region,)))

    def contains(self, p) -> bool:
        return self.region.contains(p)


@dataclass(frozen=True)
class Partition:
    ambient: Box
    pieces: tuple[Piece, ...]

    @classmethod
    def from_boxes(cls, ambient: Box, regions: Sequence[Box | BoxCover]) -> Partition:
        return cls(ambient, tuple(Piece(i + 1, r) for i, r in enumerate(regions)))

    @classmethod
    def intervals(cls, lo, hi, cuts: Sequence) -> Partition:
        """1D partition of ``[lo, hi]`` at the given interior cut points."""
        pts = [lo, *cuts, hi]
        return cls.from_boxes(Box((lo,), (hi,)), [Box((a,), (b,)) for a, b in zip(pts[:-1], pts[1:])])

    @property
    def m(self) -> int:
        return len(self.pieces)

    @property
    def dim(self) -> int:
        return self.ambient.dim

    def region(self, piece_id: int) -> BoxCover:
        return self.pieces[piece_id - 1].region

    def locate(self, p) -> list[int]:
        """Ids of every piece containing ``p`` (two or more on the separation line)."""
        p = as_point(p)
        return [pc.id for pc in self.pieces if pc.contains(p)]

    def cut_values(self) -> dict[int, list[Fraction]]:
        """Per axis, the sorted piece-bound values strictly inside the ambient box."""
        out: dict[int, set] = {a: set() for a in range(self.dim)}
        for pc in self.pieces:
            for b in pc.region:
                for a in range(self.dim):
                    for v in (b.lo[a], b.hi[a]):
                        if self.ambient.lo[a] < v < self.ambient.hi[a]:
                            out[a].add(v)
        return {a: sorted(v) for a, v in out.items()}


def validate_partition(P: Partition) -> ValidationReport:
    """Exact coverage/overlap check on the grid spanned by all box bounds."""
    rep = ValidationReport()
    n = P.ambient.dim
    if P.ambient.is_empty or P.ambient.is_degenerate():
        rep.add("ambient", "ambient box must have nonempty interior", P.ambient)
        return rep
    if P.m < 1:
        rep.add("empty", "partition has no pieces")
        return rep
    ids = [pc.id for pc in P.pieces]
    if ids != list(range(1, P.m + 1)):
        rep.add("ids", f"piece ids must be 1..{P.m} in order, got {ids}")
    for pc in P.pieces:
        if pc.region.is_empty:
            rep.add("empty", f"piece {pc.id} is empty", pc.id)
            continue
        if pc.region.dim != n:
            rep.add("dimension", f"piece {pc.id} has dimension {pc.region.dim}, expected {n}", pc.id)
            continue
        for b in pc.region:
            if not P.ambient.contains_box(b):
                rep.add("outside", f"piece {pc.id} leaves the ambient box", b)
            if b.is_degenerate():
                rep.add("degenerate", f"piece {pc.id} has a box with empty interior", b)
    if not rep.ok:
        return rep

    cuts = []
    for a in range(n):
        vals = {P.ambient.lo[a], P.ambient.hi[a]}
        for pc in P.pieces:
            for b in pc.region:
                vals.update((b.lo[a], b.hi[a]))
        cuts.append(sorted(vals))
    gaps, overlaps = [], []
    for cell_iv in itertools.product(*[list(zip(c[:-1], c[1:])) for c in cuts]):
        cell = Box(tuple(iv[0] for iv in cell_iv), tuple(iv[1] for iv in cell_iv))
        owners = [pc.id for pc in P.pieces if any(b.contains_box(cell) for b in pc.region)]
        if not owners:
            gaps.append(cell)
        elif len(owners) > 1:
            overlaps.append((tuple(owners), cell))
    for cell in gaps[:8]:
        rep.add("gap", f"coverage gap at {tuple(float(x) for x in cell.center)}", cell.center)
    for owners, cell in overlaps[:8]:
        rep.add("overlap", f"interior overlap of pieces {owners}", cell)
    return rep


def separation_line(P: Partition) -> BoxCover:
    """Union of pairwise piece intersections, as merged degenerate boxes."""
    rep = validate_partition(P)
    if not rep.ok:
        raise InvalidPartition(rep)
    parts = []
    for p, q in itertools.combinations(P.pieces, 2):
        for a in p.region:
            for b in q.region:
                c = a.intersect(b)
                if not c.is_empty:
                    parts.append(c)
    return merge_cover(parts)


def partition_distance(P: Partition, Q: Partition, m: Metric | None = None, delta=Fraction(1, 1000)) -> Fraction:
    """Max over matched pieces of the Hausdorff distance (upper-bound semantics)."""
    if P.m != Q.m:
        raise GeometryError(f"piece-count mismatch: {P.m} vs {Q.m}")
    m = m or Metric.linf()
    return max(hausdorff(P.region(i), Q.region(i), m, delta) for i in range(1, P.m + 1))
