"""Outer enclosures of the atoms of generation k.

An atom is identified by its word ``(i1, ..., ik)``: the image of the points of
piece ``i1`` that follow that itinerary for k steps.  Enclosures are built one
generation at a time: intersect the current enclosure with each piece, split
cells wider than the resolution (only where bounding boxes would wrap), map the
cells exactly and keep the image boxes.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional, Sequence

from ._parallel import ordered_map
from .geometry import Box, BoxCover, Metric, as_rational, cover_min_distance, diameter, q_to_float_down, q_to_float_up
from .pwmap import AffinePiece, InvalidMap, PiecewiseMap, PieceMap, _image_box, validate_map

__all__ = [
    "Atom",
    "AtomBudgetExceeded",
    "AtomSet",
    "atom_diameter_bound",
    "atoms_to_csv",
    "atoms_to_separation_distance",
    "default_resolution",
    "iter_atom_sets",
    "refine_atoms",
]

RESOLUTION_FLOOR = Fraction(1, 10**12)


class AtomBudgetExceeded(RuntimeError):
    def __init__(self, generation: int, boxes: int, budget: int):
        super().__init__(f"atom budget exhausted at generation {generation}: {boxes} boxes > {budget}")
        self.generation = generation
        self.boxes = boxes
        self.budget = budget


@dataclass(frozen=True)
class Atom:
    word: tuple[int, ...]
    enclosure: BoxCover

    @property
    def generation(self) -> int:
        return len(self.word)


@dataclass(frozen=True)
class AtomSet:
    generation: int
    atoms: tuple[Atom, ...]
    diam_bound: Fraction
    resolution: Optional[Fraction] = None

    def __len__(self) -> int:
        return len(self.atoms)

    def __iter__(self):
        return iter(self.atoms)

    @property
    def words(self) -> list[tuple[int, ...]]:
        return [a.word for a in self.atoms]

    def by_word(self) -> dict[tuple[int, ...], Atom]:
        return {a.word: a for a in self.atoms}

    def union(self) -> BoxCover:
        return BoxCover(tuple(b for a in self.atoms for b in a.enclosure))

    @property
    def box_count(self) -> int:
        return sum(len(a.enclosure) for a in self.atoms)


def default_resolution(lam: Fraction, diam_b: Fraction, k: int) -> Fraction:
    """Resolution used when subdividing generation-k sets: lambda^k diam(B) / 4."""
    return max(lam**k * diam_b / 4, RESOLUTION_FLOOR)


def _compact(boxes: list[Box], resolution: Optional[Fraction], metric: Metric) -> BoxCover:
    cover = BoxCover(tuple(boxes)).canonical()
    if len(cover) > 1 and resolution is not None:
        hull = cover.hull()
        if diameter(BoxCover((hull,)), metric) <= resolution:
            return BoxCover((hull,))
    return cover


def _expand(atom: Atom, maps: Sequence[PieceMap], domains: Sequence[BoxCover], metric: Metric, resolution: Optional[Fraction]) -> list[Atom]:
    out = []
    for i, (f, dom) in enumerate(zip(maps, domains), start=1):
        split = resolution is not None and not (isinstance(f, AffinePiece) and f.is_diagonal)
        cells = []
        for b in atom.enclosure:
            for d in dom:
                c = b.intersect(d)
                if c.is_empty:
                    continue
                if split:
                    cells.extend(c.subdivide([resolution / metric.weight(a) for a in range(c.dim)]))
                else:
                    cells.append(c)
        if cells:
            imgs = [_image_box(f, c, metric) for c in cells]
            out.append(Atom(atom.word + (i,), _compact(imgs, resolution, metric)))
    return out


def iter_atom_sets(
    maps: Sequence[PieceMap],
    domains: Sequence[BoxCover],
    ambient: Box,
    metric: Metric,
    lam: Fraction,
    resolution=None,
    atom_budget: int = 10**6,
    threads: Optional[int] = None,
) -> Iterator[AtomSet]:
    """Yield the atom sets of generations 1, 2, ... over the given piece domains.

    With ``resolution=None`` the schedule ``lambda^j diam(B)/4`` is used when
    splitting generation-j sets; otherwise the given value at every step.
    """
    diam_b = diameter(BoxCover((ambient,)), metric)
    fixed = None if resolution is None else as_rational(resolution)
    current = [Atom((), BoxCover((ambient,)))]
    j = 0
    while True:
        res = fixed if fixed is not None else default_resolution(lam, diam_b, j)
        nested = ordered_map(lambda a: _expand(a, maps, domains, metric, res), current, threads)
        current = sorted((a for group in nested for a in group), key=lambda a: a.word)
        j += 1
        boxes = sum(len(a.enclosure) for a in current)
        if boxes > atom_budget:
            raise AtomBudgetExceeded(j, boxes, atom_budget)
        dmax = max((diameter(a.enclosure, metric) for a in current), default=Fraction(0))
        yield AtomSet(j, tuple(current), dmax, res)


def _map_domains(F: PiecewiseMap) -> list[BoxCover]:
    return [F.partition.region(i) for i in range(1, F.m + 1)]


def refine_atoms(F: PiecewiseMap, k: int, resolution=None, atom_budget: int = 10**6, threads: Optional[int] = None) -> AtomSet:
    """Enclosures of every possibly nonempty atom of generation ``k``."""
    if k < 1:
        raise ValueError("generation must be >= 1")
    if resolution is not None and as_rational(resolution) <= 0:
        raise ValueError("resolution must be positive")
    rep = validate_map(F)
    if not rep.ok:
        raise InvalidMap(rep)
    for A in iter_atom_sets(F.maps, _map_domains(F), F.ambient, F.metric, F.lam, resolution, atom_budget, threads):
        if A.generation == k:
            return A
    raise AssertionError("unreachable")


def atom_diameter_bound(F: PiecewiseMap, k: int) -> Fraction:
    """lambda^k diam(B): bounds the diameter of every true atom of generation k."""
    return F.lam**k * diameter(BoxCover((F.ambient,)), F.metric)


def atoms_to_separation_distance(A: AtomSet, S: BoxCover, m: Metric | None = None):
    """Certified lower bound on dist(union of enclosures, S); ``inf`` if S is empty."""
    if S.is_empty:
        return math.inf
    return cover_min_distance(A.union(), S, m or Metric.linf())


def atoms_to_csv(A: AtomSet) -> str:
    """One row per enclosure box: word, box index, lo/hi per axis."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    n = A.atoms[0].enclosure.dim if A.atoms else 0
    w.writerow(["word", "box"] + [f"lo{a}" for a in range(n)] + [f"hi{a}" for a in range(n)])
    for atom in A.atoms:
        word = "-".join(str(i) for i in atom.word)
        for j, b in enumerate(atom.enclosure):
            w.writerow([word, j] + [repr(q_to_float_down(v)) for v in b.lo] + [repr(q_to_float_up(v)) for v in b.hi])
    return buf.getvalue()
