"""Certification of final periodicity.

Find a generation k0 whose atoms are at positive distance d from the
separation line, go to a generation whose atoms have diameter <= d/2, read the
atom transition graph, and locate one periodic orbit per graph cycle by
fixed-point iteration with an a-posteriori error bound.

The successor of an atom is determined symbolically: if atom ``w = (i1..ik)``
sits inside piece ``i``, its image is the atom ``(i1..ik, i)`` of generation
k+1, which lies in the generation-k atom ``(i2..ik, i)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from ._parallel import ordered_map
from .atoms import (
    AtomBudgetExceeded,
    AtomSet,
    atom_diameter_bound,
    atoms_to_separation_distance,
    iter_atom_sets,
)
from .geometry import BoxCover, Metric, cover_min_distance, diameter
from .partition import separation_line
from .pwmap import InvalidMap, PiecewiseMap, validate_map

logger = logging.getLogger(__name__)

__all__ = [
    "AMBIGUOUS",
    "Certificate",
    "CycleMatch",
    "Inconclusive",
    "ItineraryGraph",
    "LimitCycle",
    "NonContraction",
    "PreconditionError",
    "UNRESOLVED",
    "basin_labels",
    "certify",
    "grid_points",
    "locate_cycle",
    "match_cycles",
    "persistence_radius",
    "transition_graph",
]

AMBIGUOUS = -1
UNRESOLVED = -2
EPS_MARGIN = Fraction(999, 1000)


class PreconditionError(ValueError):
    pass


class NonContraction(RuntimeError):
    """Fixed-point iteration defect grew: enclosure or precondition bug."""


@dataclass(frozen=True)
class ItineraryGraph:
    nodes: tuple[tuple[int, ...], ...]
    successor: dict
    piece_of: dict

    def cycles(self) -> list[list[tuple[int, ...]]]:
        """Cycles of the functional graph, each rotated to start at its least word."""
        state: dict = {}
        found = []
        for start in self.nodes:
            if start in state:
                continue
            path, pos = [], {}
            w = start
            while w not in state and w not in pos:
                pos[w] = len(path)
                path.append(w)
                w = self.successor[w]
            if w in pos:
                cyc = path[pos[w]:]
                j = cyc.index(min(cyc))
                found.append(cyc[j:] + cyc[:j])
            for v in path:
                state[v] = True
        return sorted(found, key=lambda c: c[0])


@dataclass(frozen=True)
class LimitCycle:
    period: int
    points: tuple[tuple[float, ...], ...]
    word_cycle: tuple[int, ...]
    residual: float

    def as_array(self) -> np.ndarray:
        return np.array(self.points, dtype=float)


@dataclass(frozen=True)
class Certificate:
    k0: int
    d: Fraction
    k_work: int
    cycles: tuple[LimitCycle, ...]
    atom_to_cycle: dict
    epsilon_persist: Fraction
    lam: Fraction
    metric: Metric
    graph: ItineraryGraph
    fp_tol: float
    budgets_used: dict = field(default_factory=dict)

    @property
    def epsilon_star_coeffs(self) -> tuple[Fraction, Fraction]:
        """(c, lambda) such that eps* = c*eps / (1 - (lambda + eps))."""
        return Fraction(2), self.lam

    def epsilon_star(self, eps) -> float:
        c, lam = self.epsilon_star_coeffs
        eps = float(eps)
        if float(lam) + eps >= 1:
            return math.inf
        return float(c) * eps / (1 - (float(lam) + eps))

    @property
    def ok(self) -> bool:
        return True


@dataclass(frozen=True)
class Inconclusive:
    k_max_tried: int
    min_distance_seen: Fraction
    budget_exhausted: str
    distances: tuple = ()

    @property
    def ok(self) -> bool:
        return False


def transition_graph(A: AtomSet, F: PiecewiseMap) -> ItineraryGraph:
    """Symbolic successor map on the atoms of one generation."""
    S = separation_line(F.partition)
    piece_of = {}
    for atom in A:
        if not S.is_empty and cover_min_distance(atom.enclosure, S, F.metric) <= 0:
            raise PreconditionError(f"atom {atom.word} is not separated from S")
        owners = set()
        for b in atom.enclosure:
            inside = [pc.id for pc in F.partition.pieces if any(r.contains_box(b) for r in pc.region)]
            if len(inside) != 1:
                raise PreconditionError(f"atom {atom.word} box is not inside a single piece")
            owners.add(inside[0])
        if len(owners) != 1:
            raise PreconditionError(f"atom {atom.word} enclosure spans pieces {sorted(owners)}")
        piece_of[atom.word] = owners.pop()
    words = set(A.words)
    succ = {}
    dropped = set()
    for w in A.words:
        nxt = w[1:] + (piece_of[w],)
        if nxt not in words:
            # the image word was certified empty, so this enclosure holds no true atom
            dropped.add(w)
            continue
        succ[w] = nxt
    # removing a spurious atom can strand its predecessors in turn
    while True:
        stale = {w for w, v in succ.items() if v in dropped}
        if not stale:
            break
        for w in stale:
            del succ[w]
        dropped |= stale
    nodes = tuple(w for w in A.words if w not in dropped)
    if not nodes:
        raise PreconditionError("no atoms left after pruning")
    return ItineraryGraph(nodes, succ, {w: piece_of[w] for w in nodes})


def _compose_float(F: PiecewiseMap, word: Sequence[int], x: np.ndarray) -> np.ndarray:
    for i in word:
        x = F.piece_map(i).eval_float(x[None, :])[0]
    return x


def _divisors(p: int) -> list[int]:
    return [q for q in range(1, p) if p % q == 0]


def locate_cycle(F: PiecewiseMap, word_cycle: Sequence[int], fp_tol: float, start=None, max_iter: int = 100_000) -> LimitCycle:
    """Banach iteration of the composition along ``word_cycle``.

    Stops once successive iterates differ by at most ``fp_tol*(1 - lam^p)``;
    the residual ``lam^p/(1-lam^p) * step`` (plus a rounding allowance) bounds
    the distance to the true periodic point.
    """
    word = tuple(word_cycle)
    p = len(word)
    if p < 1:
        raise ValueError("empty word cycle")
    lam_p = float(F.lam) ** p
    metric = F.metric
    if start is None:
        start = F.partition.region(word[0]).hull().center
    x = np.array([float(v) for v in start])
    step_prev = math.inf
    residual = math.inf
    for _ in range(max_iter):
        y = _compose_float(F, word, x)
        step = float(metric.norm_float(y - x))
        if step > 1e-12 and step > lam_p * step_prev * (1 + 1e-6) + 1e-15:
            raise NonContraction(f"defect grew from {step_prev:g} to {step:g} on word cycle {word}")
        x, step_prev = y, step
        rounding = 8 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(x)))) * p / (1 - lam_p)
        residual = lam_p / (1 - lam_p) * step + rounding
        if step <= fp_tol * (1 - lam_p):
            break
    else:
        raise NonContraction(f"no convergence on word cycle {word} after {max_iter} steps")
    for q in _divisors(p):
        if word[:q] * (p // q) == word:
            z = _compose_float(F, word[:q], x)
            if float(metric.norm_float(z - x)) <= fp_tol:
                logger.warning("word cycle %s has least period %d", word, q)
                return locate_cycle(F, word[:q], fp_tol, x, max_iter)
    pts = [x]
    for i in word[:-1]:
        pts.append(F.piece_map(i).eval_float(pts[-1][None, :])[0])
    return LimitCycle(p, tuple(tuple(float(v) for v in pt) for pt in pts), word, float(residual))


def _canonical_rotation(word: tuple[int, ...]) -> int:
    return min(range(len(word)), key=lambda j: word[j:] + word[:j])


def persistence_radius(C: Certificate, F: PiecewiseMap):
    """Return ``(eps, eps_star)``: perturbation radius and the displacement bound function."""
    return _radius(C.d, F.lam), C.epsilon_star


def _radius(d: Fraction, lam: Fraction) -> Fraction:
    return min(d / 3, (1 - lam) / 2) * EPS_MARGIN


def certify(
    F: PiecewiseMap,
    k_max: int = 64,
    atom_budget: int = 10**6,
    fp_tol: Optional[float] = None,
    resolution=None,
    threads: Optional[int] = None,
) -> Union[Certificate, Inconclusive]:
    rep = validate_map(F)
    if not rep.ok:
        raise InvalidMap(rep)
    lam = F.lam
    S = separation_line(F.partition)
    diam_b = diameter(BoxCover((F.ambient,)), F.metric)
    if fp_tol is None:
        fp_tol = 1e-10 * float(diam_b)
    domains = [F.partition.region(i) for i in range(1, F.m + 1)]
    gen = iter_atom_sets(F.maps, domains, F.ambient, F.metric, lam, resolution, atom_budget, threads)
    distances = []
    k0 = d = None
    A = None
    try:
        for A in gen:
            dist = atoms_to_separation_distance(A, S, F.metric)
            distances.append(dist)
            if dist > 0:
                k0 = A.generation
                d = diam_b if dist == math.inf else dist
                break
            if A.generation >= k_max:
                break
    except AtomBudgetExceeded as exc:
        return Inconclusive(len(distances), max(distances, default=Fraction(0)), str(exc), tuple(distances))
    if k0 is None:
        return Inconclusive(len(distances), max(distances, default=Fraction(0)), f"no separated generation up to k_max={k_max}", tuple(distances))

    k_work = k0
    while atom_diameter_bound(F, k_work) > d / 2:
        k_work += 1
    graph = None
    try:
        while A.generation < k_work:
            A = next(gen)
        # enclosure slack can leave a generation ambiguous; go deeper rather than guess
        while graph is None:
            try:
                graph = transition_graph(A, F)
            except PreconditionError as exc:
                if A.generation >= max(k_max, k_work) + 16:
                    return Inconclusive(A.generation, d, f"transition graph unresolved: {exc}", tuple(distances))
                A = next(gen)
    except AtomBudgetExceeded as exc:
        return Inconclusive(k0, d, str(exc), tuple(distances))
    k_work = A.generation

    enclosures = A.by_word()
    raw_cycles = graph.cycles()

    def locate(cyc):
        word = tuple(graph.piece_of[w] for w in cyc)
        j = _canonical_rotation(word)
        start = enclosures[cyc[j]].enclosure.hull().center
        return locate_cycle(F, word[j:] + word[:j], fp_tol, start)

    cycles = ordered_map(locate, raw_cycles, threads)
    cycle_index = {}
    for idx, cyc in enumerate(raw_cycles):
        for w in cyc:
            cycle_index[w] = idx
    atom_to_cycle = {}
    for w in graph.nodes:
        path = []
        v = w
        while v not in cycle_index and v not in atom_to_cycle:
            path.append(v)
            v = graph.successor[v]
        target = cycle_index.get(v, atom_to_cycle.get(v))
        for u in path:
            atom_to_cycle[u] = target
    atom_to_cycle.update(cycle_index)
    eps = _radius(d, lam)
    budgets = {"generations": A.generation, "atoms": len(A), "boxes": A.box_count}
    return Certificate(k0, d, k_work, tuple(cycles), atom_to_cycle, eps, lam, F.metric, graph, fp_tol, budgets)


@dataclass(frozen=True)
class CycleMatch:
    index_f: int
    index_g: int
    distance: float
    tie: bool


def _cycle_hausdorff(a: LimitCycle, b: LimitCycle, metric: Metric) -> float:
    A, B = a.as_array(), b.as_array()
    D = metric.norm_float(A[:, None, :] - B[None, :, :])
    return float(max(D.min(axis=1).max(), D.min(axis=0).max()))


def match_cycles(cf: Certificate, cg: Certificate, metric: Metric | None = None) -> list[CycleMatch]:
    """Pair each cycle of ``cg`` with its Hausdorff-nearest cycle of ``cf``.

    Ties (two candidates at equal distance) are flagged, not resolved.
    """
    metric = metric or cf.metric
    out = []
    for j, g in enumerate(cg.cycles):
        ds = [_cycle_hausdorff(f, g, metric) for f in cf.cycles]
        best = int(np.argmin(ds))
        tie = sum(1 for v in ds if math.isclose(v, ds[best], rel_tol=1e-12, abs_tol=1e-15)) > 1
        out.append(CycleMatch(best, j, ds[best], tie))
    return out


def grid_points(lo: Sequence[float], hi: Sequence[float], counts: Sequence[int]) -> np.ndarray:
    """Regular lattice (inclusive of both ends), flattened in C order."""
    axes = [np.linspace(l, h, c) for l, h, c in zip(lo, hi, counts)]
    if not axes or any(len(a) == 0 for a in axes):
        return np.zeros((0, len(axes)))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def basin_labels(F: PiecewiseMap, C: Certificate, grid, cap: int = 64) -> np.ndarray:
    """Cycle index for each grid point, ``AMBIGUOUS`` (-1) when branches at S
    reach different cycles, ``UNRESOLVED`` (-2) when a landing word is unknown."""
    from .orbits import BranchPolicy, iterate_batch, iterate_orbit

    X = np.asarray(grid, dtype=float)
    if X.size == 0:
        return np.zeros(0, dtype=int)
    X = X.reshape(len(X), -1)
    steps = C.k0 + C.k_work
    kw = C.k_work

    def label_words(words) -> int:
        hits = {C.atom_to_cycle.get(w, UNRESOLVED) for w in words}
        if len(hits) == 1:
            return hits.pop()
        return UNRESOLVED if hits == {UNRESOLVED} else AMBIGUOUS

    _, itins, on_s = iterate_batch(F, X, steps)
    labels = np.empty(len(X), dtype=int)
    for r in range(len(X)):
        if on_s[r]:
            branches = iterate_orbit(F, X[r], steps, BranchPolicy.all(cap))
            labels[r] = label_words({tuple(b.itinerary[-kw:]) for b in branches})
        else:
            labels[r] = label_words({tuple(int(v) for v in itins[r, -kw:])})
    return labels
