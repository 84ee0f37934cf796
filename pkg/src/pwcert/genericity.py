"""Repair by moving the separation line.

The piece maps are extended to inflated domains ``U_i`` (for affine pieces the
same formula is the extension).  Extended atoms are computed over the ``U_i``
without cutting them by a partition; once they are small, each interior cut of
the box partition is moved inside its window to a coordinate whose hyperplane
misses every extended atom.  The moved partition with the original formulas is
an eps-perturbation whose atoms avoid its own separation line.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .atoms import AtomBudgetExceeded, AtomSet, iter_atom_sets
from .certifier import Certificate, certify
from .geometry import Box, BoxCover, Metric, as_rational, cover_min_distance, diameter
from .partition import Partition, Piece, separation_line
from .pwmap import AffinePiece, InvalidMap, PiecewiseMap, PluginPiece, is_epsilon_perturbation, validate_map

__all__ = [
    "ExtendedMap",
    "ExtensionError",
    "RepairFailed",
    "RepairResult",
    "extend_map",
    "extended_atoms",
    "repair",
]

MARGIN = Fraction(999, 1000)
SHRINK = Fraction(4, 5)


class ExtensionError(ValueError):
    def __init__(self, message: str, pair=None):
        super().__init__(message)
        self.pair = pair


class RepairFailed(RuntimeError):
    def __init__(self, message: str, k_tried: int, blocking=None):
        super().__init__(message)
        self.k_tried = k_tried
        self.blocking = blocking


@dataclass(frozen=True)
class ExtendedMap:
    base: PiecewiseMap
    inflation: Fraction
    epsilon1: Fraction
    domains: tuple[BoxCover, ...]
    lambda_prime: Fraction

    @property
    def images(self) -> list[BoxCover]:
        return [_image_cover(self.base.piece_map(i + 1), U, self.base.metric) for i, U in enumerate(self.domains)]


def _image_cover(f, U: BoxCover, metric: Metric) -> BoxCover:
    if isinstance(f, AffinePiece):
        return BoxCover(tuple(f.image_box(b) for b in U))
    return BoxCover(tuple(f.image_box(b, metric) for b in U))


def _coord_radii(metric: Metric, r: Fraction, n: int) -> list[Fraction]:
    return [r / metric.weight(a) for a in range(n)]


def _inflate(F: PiecewiseMap, r: Fraction) -> tuple[BoxCover, ...]:
    radii = _coord_radii(F.metric, r, F.dim)
    return tuple(
        BoxCover(tuple(b.inflate(radii).clip(F.ambient) for b in F.partition.region(i)))
        for i in range(1, F.m + 1)
    )


def _extension_problem(F: PiecewiseMap, domains) -> Optional[tuple]:
    imgs = [_image_cover(F.piece_map(i + 1), U, F.metric) for i, U in enumerate(domains)]
    for i, img in enumerate(imgs, start=1):
        for b in img:
            if not F.ambient.interior_contains_box(b):
                return ("interior", i)
    for i, j in itertools.combinations(range(len(imgs)), 2):
        if cover_min_distance(imgs[i], imgs[j], F.metric) <= 0:
            return ("separation", i + 1, j + 1)
    return None


def extend_map(F: PiecewiseMap, eps, max_shrinks: int = 60) -> ExtendedMap:
    """Inflate every piece by at most ``eps``, shrinking until the extended
    images are separated and inside int(B)."""
    eps = as_rational(eps)
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    rep = validate_map(F)
    if not rep.ok:
        raise InvalidMap(rep)
    for f in F.maps:
        if isinstance(f, PluginPiece) and not f.extends:
            raise ExtensionError(f"plugin {f.name!r} supplies no extension beyond its piece")
    r = eps
    problem = None
    for _ in range(max_shrinks):
        domains = _inflate(F, r)
        problem = _extension_problem(F, domains)
        if problem is None:
            eps1 = min(eps, r) * MARGIN
            return ExtendedMap(F, r, eps1, domains, F.lam)
        r *= SHRINK
    raise ExtensionError(f"no inflation <= {float(eps):g} keeps the extension valid: {problem}", problem)


def extended_atoms(E: ExtendedMap, k: int, resolution=None, atom_budget: int = 10**6, threads=None) -> AtomSet:
    """Enclosures of ``f_ik o ... o f_i1 (U_i1)`` for every word, domains chained through the U_i."""
    if k < 1:
        raise ValueError("generation must be >= 1")
    F = E.base
    for A in iter_atom_sets(F.maps, E.domains, F.ambient, F.metric, E.lambda_prime, resolution, atom_budget, threads):
        if A.generation == k:
            return A
    raise AssertionError("unreachable")


@dataclass
class RepairResult:
    G: PiecewiseMap
    moved_faces: list[tuple[int, Fraction, Fraction]]
    k_used: int
    gap_width: Optional[Fraction]
    certificate: Certificate
    epsilon: Fraction
    epsilon1: Optional[Fraction] = None


def _move_cuts(P: Partition, moves: dict[tuple[int, Fraction], Fraction]) -> Partition:
    def mv(a, v):
        return moves.get((a, v), v)

    pieces = []
    for pc in P.pieces:
        boxes = []
        for b in pc.region:
            boxes.append(Box(tuple(mv(a, v) for a, v in enumerate(b.lo)), tuple(mv(a, v) for a, v in enumerate(b.hi))))
        pieces.append(Piece(pc.id, BoxCover(tuple(boxes))))
    return Partition(P.ambient, tuple(pieces))


def _widest_gap(intervals: list[tuple[Fraction, Fraction]], lo: Fraction, hi: Fraction, c: Fraction):
    """Widest open sub-interval of (lo, hi) missing every closed interval; ties go to the one nearest c."""
    ivs = sorted((max(a, lo), min(b, hi)) for a, b in intervals if b > lo and a < hi)
    gaps = []
    cur = lo
    for a, b in ivs:
        if a > cur:
            gaps.append((cur, a))
        cur = max(cur, b)
    if cur < hi:
        gaps.append((cur, hi))
    if not gaps:
        return None
    return max(gaps, key=lambda g: (g[1] - g[0], -abs((g[0] + g[1]) / 2 - c)))


def _face_windows(F: PiecewiseMap, eps1: Fraction, inflation: Fraction) -> list[tuple[int, Fraction, Fraction]]:
    """(axis, cut, half-width in coordinates) for every interior cut."""
    n = F.dim
    metric = F.metric
    # moves on several axes combine in l2
    scale = Fraction(1) if metric.is_linf_type else 1 / as_rational(math.sqrt(n) * (1 + 1e-12))
    out = []
    cuts = F.partition.cut_values()
    for a in range(n):
        vals = [F.ambient.lo[a]] + cuts[a] + [F.ambient.hi[a]]
        for j in range(1, len(vals) - 1):
            c = vals[j]
            room = min(c - vals[j - 1], vals[j + 1] - c) / 2 * MARGIN
            w = min(eps1 * scale / metric.weight(a), inflation / metric.weight(a) * MARGIN, room)
            out.append((a, c, w))
    return out


def repair(
    F: PiecewiseMap,
    eps,
    k_max: int = 40,
    atom_budget: int = 10**6,
    certify_k_max: int = 64,
    resolution=None,
    threads=None,
) -> RepairResult:
    """Build a certifiable eps-perturbation of ``F`` by moving only its cuts."""
    eps = as_rational(eps)
    rep = validate_map(F)
    if not rep.ok:
        raise InvalidMap(rep)
    base = certify(F, k_max=k_max, atom_budget=atom_budget, resolution=resolution, threads=threads)
    if isinstance(base, Certificate):
        return RepairResult(F, [], base.k0, None, base, eps)

    E = extend_map(F, eps)
    eps1 = E.epsilon1
    diam_b = diameter(BoxCover((F.ambient,)), F.metric)
    k_start = 1
    while E.lambda_prime**k_start * diam_b >= eps1 / 2:
        k_start += 1
    if k_start > k_max:
        raise RepairFailed(
            f"extended atoms need generation {k_start} > k_max={k_max} to shrink below eps1/2={float(eps1 / 2):g}",
            k_start,
        )
    windows = _face_windows(F, eps1, E.inflation)
    S = separation_line(F.partition)
    faces_by_cut = {}
    for a, c, _ in windows:
        faces_by_cut[(a, c)] = [s for s in S if s.lo[a] == c == s.hi[a]]
    lateral_pad = {a: max((w for aa, _, w in windows if aa == a), default=Fraction(0)) for a in range(F.dim)}

    blocking = None
    k_tried = k_start
    gen = iter_atom_sets(F.maps, E.domains, F.ambient, F.metric, E.lambda_prime, resolution, atom_budget, threads)
    try:
        for A in gen:
            if A.generation < k_start:
                continue
            k_tried = A.generation
            if A.generation > k_max:
                break
            boxes = list(A.union())
            moves = {}
            widths = []
            blocking = None
            for a, c, w in windows:
                intervals = []
                for box in boxes:
                    if not (box.lo[a] < c + w and box.hi[a] > c - w):
                        continue
                    near = False
                    for face in faces_by_cut[(a, c)]:
                        if all(
                            box.lo[b] <= face.hi[b] + lateral_pad[b] and box.hi[b] >= face.lo[b] - lateral_pad[b]
                            for b in range(F.dim)
                            if b != a
                        ):
                            near = True
                            break
                    if near:
                        intervals.append((box.lo[a], box.hi[a]))
                gap = _widest_gap(intervals, c - w, c + w, c)
                if gap is None:
                    blocking = {"axis": a, "cut": c, "window": (c - w, c + w), "intervals": sorted(intervals)}
                    break
                moves[(a, c)] = (gap[0] + gap[1]) / 2
                widths.append(gap[1] - gap[0])
            if blocking is not None:
                continue
            G = F.with_partition(_move_cuts(F.partition, moves))
            if not validate_map(G).ok:
                continue
            if not is_epsilon_perturbation(F, G, eps).verdict:
                continue
            S_G = separation_line(G.partition)
            if not S_G.is_empty and cover_min_distance(S_G, A.union(), F.metric) <= 0:
                continue
            cert = certify(G, k_max=certify_k_max, atom_budget=atom_budget, resolution=resolution, threads=threads)
            if not isinstance(cert, Certificate):
                continue
            moved = [(a, c, v) for (a, c), v in sorted(moves.items()) if v != c]
            return RepairResult(G, moved, A.generation, min(widths, default=None), cert, eps, eps1)
    except AtomBudgetExceeded as exc:
        raise RepairFailed(f"extended atoms exceeded the budget: {exc}", exc.generation, blocking) from exc
    raise RepairFailed(f"no admissible cut positions up to generation {k_max}", k_tried, blocking)
