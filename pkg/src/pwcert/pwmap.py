"""Piecewise contractive maps with the separation property."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .geometry import (
    Box,
    BoxCover,
    GeometryError,
    Metric,
    _sqrt_up,
    as_point,
    as_rational,
    cover_min_distance,
)
from .partition import Partition, ValidationReport, partition_distance, validate_partition

__all__ = [
    "AffinePiece",
    "InvalidMap",
    "NotContractive",
    "NotInImage",
    "OutsideDomain",
    "PerturbationReport",
    "PiecewiseMap",
    "PluginPiece",
    "apply",
    "contraction_rate",
    "inverse",
    "is_epsilon_perturbation",
    "validate_map",
]


class NotContractive(ValueError):
    pass


class InvalidMap(ValueError):
    def __init__(self, report: ValidationReport):
        super().__init__("invalid map: " + "; ".join(v.message for v in report.violations))
        self.report = report


class OutsideDomain(ValueError):
    pass


class NotInImage(ValueError):
    pass


@dataclass(frozen=True)
class AffinePiece:
    """``x -> A x + b`` with exact rational entries."""

    matrix: tuple[tuple[Fraction, ...], ...]
    offset: tuple[Fraction, ...]

    def __post_init__(self):
        A = self.matrix
        if isinstance(A, (int, float, Fraction, str)):
            A = ((A,),)
        A = tuple(tuple(as_rational(v) for v in row) for row in A)
        b = as_point(self.offset)
        if any(len(row) != len(b) for row in A) or len(A) != len(b):
            raise GeometryError(f"affine piece needs a {len(b)}x{len(b)} matrix")
        object.__setattr__(self, "matrix", A)
        object.__setattr__(self, "offset", b)

    @classmethod
    def scalar(cls, a, b) -> AffinePiece:
        return cls(((a,),), (b,))

    @property
    def dim(self) -> int:
        return len(self.offset)

    @cached_property
    def is_diagonal(self) -> bool:
        return all(v == 0 for i, row in enumerate(self.matrix) for j, v in enumerate(row) if i != j)

    @cached_property
    def _float(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.array([[float(v) for v in row] for row in self.matrix]), np.array([float(v) for v in self.offset]))

    def __call__(self, x) -> tuple[Fraction, ...]:
        x = as_point(x)
        return tuple(sum((a * v for a, v in zip(row, x)), Fraction(0)) + c for row, c in zip(self.matrix, self.offset))

    def eval_float(self, X: np.ndarray) -> np.ndarray:
        A, b = self._float
        return np.asarray(X, dtype=float) @ A.T + b

    def image_box(self, box: Box) -> Box:
        """Exact bounding box of the affine image of ``box``."""
        lo, hi = [], []
        for row, c in zip(self.matrix, self.offset):
            l = h = c
            for a, bl, bh in zip(row, box.lo, box.hi):
                if a >= 0:
                    l += a * bl
                    h += a * bh
                else:
                    l += a * bh
                    h += a * bl
            lo.append(l)
            hi.append(h)
        return Box(tuple(lo), tuple(hi))

    def lipschitz(self, metric: Metric) -> Fraction:
        A = self.matrix
        n = self.dim
        if metric.kind == "l2":
            if self.is_diagonal:
                return max(abs(A[i][i]) for i in range(n))
            row = max(sum(abs(v) for v in r) for r in A)
            col = max(sum(abs(A[i][j]) for i in range(n)) for j in range(n))
            return _sqrt_up(row * col)
        w = [metric.weight(a) for a in range(n)]
        return max(sum(w[i] * abs(A[i][j]) / w[j] for j in range(n)) for i in range(n))

    def determinant(self) -> Fraction:
        M = [list(r) for r in self.matrix]
        n = len(M)
        det = Fraction(1)
        for c in range(n):
            p = next((r for r in range(c, n) if M[r][c] != 0), None)
            if p is None:
                return Fraction(0)
            if p != c:
                M[c], M[p] = M[p], M[c]
                det = -det
            det *= M[c][c]
            for r in range(c + 1, n):
                f = M[r][c] / M[c][c]
                for k in range(c, n):
                    M[r][k] -= f * M[c][k]
        return det

    def solve(self, y) -> tuple[Fraction, ...]:
        """The exact preimage ``A^{-1}(y - b)``."""
        y = as_point(y)
        n = self.dim
        M = [list(r) + [yi - c] for r, yi, c in zip(self.matrix, y, self.offset)]
        for c in range(n):
            p = next((r for r in range(c, n) if M[r][c] != 0), None)
            if p is None:
                raise NotInImage("singular affine piece")
            M[c], M[p] = M[p], M[c]
            for r in range(n):
                if r != c and M[r][c] != 0:
                    f = M[r][c] / M[c][c]
                    for k in range(c, n + 1):
                        M[r][k] -= f * M[c][k]
        return tuple(M[i][n] / M[i][i] for i in range(n))


@dataclass(frozen=True)
class PluginPiece:
    """An opaque contraction with a declared Lipschitz bound.

    ``func`` maps an ``(N, n)`` float array to an ``(N, n)`` array.  Enclosures
    are metric balls around the image of the box center; the declaration is
    trusted and recorded.
    """

    func: Callable[[np.ndarray], np.ndarray]
    lipschitz_bound: Fraction
    dim: int
    name: str = "plugin"
    injective: bool = True
    inverse_func: Optional[Callable[[np.ndarray], np.ndarray]] = None
    extends: bool = False

    def __post_init__(self):
        object.__setattr__(self, "lipschitz_bound", as_rational(self.lipschitz_bound))

    def eval_float(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.asarray(self.func(X), dtype=float).reshape(X.shape)

    def __call__(self, x) -> tuple[Fraction, ...]:
        x = as_point(x)
        y = self.eval_float(np.array([[float(v) for v in x]]))[0]
        return tuple(as_rational(v) for v in y)

    def lipschitz(self, metric: Metric) -> Fraction:
        return self.lipschitz_bound

    def image_box(self, box: Box, metric: Metric) -> Box:
        c = np.array([[float(v) for v in box.center]])
        y = self.eval_float(c)[0]
        R = metric.norm_bounds([w / 2 for w in box.widths])[1]
        r = self.lipschitz_bound * R
        lo, hi = [], []
        for a, v in enumerate(y):
            slack = Fraction(abs(float(v)) * 8 * np.finfo(float).eps + 1e-300)
            half = r / metric.weight(a) + slack
            lo.append(Fraction(float(v)) - half)
            hi.append(Fraction(float(v)) + half)
        return Box(tuple(lo), tuple(hi))


PieceMap = Union[AffinePiece, PluginPiece]


def _image_box(f: PieceMap, box: Box, metric: Metric) -> Box:
    if isinstance(f, AffinePiece):
        return f.image_box(box)
    return f.image_box(box, metric)


@dataclass(frozen=True)
class PiecewiseMap:
    """A partition plus one contraction per piece.

    Construction does not validate; use :func:`validate_map` or
    :meth:`checked`.
    """

    partition: Partition
    maps: tuple[PieceMap, ...]
    metric: Metric = field(default_factory=Metric.linf)
    declared_lambda: Optional[Fraction] = None

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))
        if self.declared_lambda is not None:
            object.__setattr__(self, "declared_lambda", as_rational(self.declared_lambda))

    @classmethod
    def affine_1d(cls, lo, hi, cuts: Sequence, coeffs: Sequence[tuple], metric: Metric | None = None) -> PiecewiseMap:
        """Scalar affine pieces ``a*x + b`` on the intervals between ``cuts``."""
        P = Partition.intervals(lo, hi, cuts)
        return cls(P, tuple(AffinePiece.scalar(a, b) for a, b in coeffs), metric or Metric.linf())

    def checked(self) -> PiecewiseMap:
        rep = validate_map(self)
        if not rep.ok:
            raise InvalidMap(rep)
        return self

    @property
    def m(self) -> int:
        return self.partition.m

    @property
    def dim(self) -> int:
        return self.partition.dim

    @property
    def ambient(self) -> Box:
        return self.partition.ambient

    @cached_property
    def rate_bound(self) -> Fraction:
        """Best available contraction bound (may be >= 1 for invalid maps)."""
        computed = max(f.lipschitz(self.metric) for f in self.maps)
        if self.declared_lambda is not None:
            return max(computed, self.declared_lambda)
        return computed

    @property
    def lam(self) -> Fraction:
        return contraction_rate(self)

    @property
    def is_affine(self) -> bool:
        return all(isinstance(f, AffinePiece) for f in self.maps)

    def piece_map(self, piece_id: int) -> PieceMap:
        return self.maps[piece_id - 1]

    def image_cover(self, piece_id: int, resolution: Fraction | None = None) -> BoxCover:
        f = self.piece_map(piece_id)
        out = []
        for b in self.partition.region(piece_id):
            cells = [b]
            if resolution is not None and not (isinstance(f, AffinePiece) and f.is_diagonal):
                cells = b.subdivide([resolution / self.metric.weight(a) for a in range(b.dim)])
            out.extend(_image_box(f, c, self.metric) for c in cells)
        return BoxCover(tuple(out))

    def with_partition(self, partition: Partition) -> PiecewiseMap:
        return PiecewiseMap(partition, self.maps, self.metric, self.declared_lambda)


def contraction_rate(F: PiecewiseMap) -> Fraction:
    """Certified uniform contraction bound, or :class:`NotContractive`."""
    lam = F.rate_bound
    if lam >= 1:
        raise NotContractive(f"not contractive under {F.metric.kind}: bound {float(lam):g} >= 1")
    return lam


def _images_disjoint(F: PiecewiseMap, i: int, j: int) -> bool:
    ci, cj = F.image_cover(i), F.image_cover(j)
    if cover_min_distance(ci, cj, F.metric) > 0:
        return True
    if all(isinstance(f, AffinePiece) and f.is_diagonal for f in (F.piece_map(i), F.piece_map(j))):
        return False
    # bounding boxes of non-diagonal images wrap; retry on subdivided pieces
    res = max(F.ambient.widths) / 16
    for _ in range(3):
        ci, cj = F.image_cover(i, res), F.image_cover(j, res)
        if cover_min_distance(ci, cj, F.metric) > 0:
            return True
        res /= 2
    return False


def validate_map(F: PiecewiseMap) -> ValidationReport:
    rep = validate_partition(F.partition)
    if len(F.maps) != F.m:
        rep.add("maps", f"{len(F.maps)} piece maps for {F.m} pieces")
        return rep
    for i, f in enumerate(F.maps, start=1):
        if f.dim != F.dim:
            rep.add("dimension", f"map of piece {i} has dimension {f.dim}, expected {F.dim}", i)
    if not rep.ok:
        return rep
    F.metric.check_dim(F.dim)
    try:
        contraction_rate(F)
    except NotContractive as exc:
        rep.add("contraction", str(exc))
    for i, f in enumerate(F.maps, start=1):
        if isinstance(f, AffinePiece) and f.determinant() == 0:
            rep.add("singular", f"map of piece {i} is not invertible", i)
        if isinstance(f, PluginPiece) and not f.injective:
            rep.add("singular", f"plugin map of piece {i} is not declared injective", i)
    for i in range(1, F.m + 1):
        img = F.image_cover(i)
        for b in img:
            if not F.ambient.interior_contains_box(b):
                rep.add("interior", f"image of piece {i} is not inside int(B)", b)
                break
    for i, j in itertools.combinations(range(1, F.m + 1), 2):
        if not _images_disjoint(F, i, j):
            rep.add("separation", f"images of pieces {i} and {j} are not separated", (i, j))
    return rep


def apply(F: PiecewiseMap, x) -> list[tuple[int, tuple[Fraction, ...]]]:
    """All images of ``x``: one per piece containing it."""
    x = as_point(x)
    if len(x) != F.dim:
        raise GeometryError(f"dimension mismatch: {len(x)} vs {F.dim}")
    if not F.ambient.contains(x):
        raise OutsideDomain(f"{tuple(float(v) for v in x)} is outside B")
    return [(i, F.piece_map(i)(x)) for i in F.partition.locate(x)]


def inverse(F: PiecewiseMap, y) -> tuple[Fraction, ...]:
    """The unique preimage of ``y`` in F(B)."""
    y = as_point(y)
    for i in range(1, F.m + 1):
        f = F.piece_map(i)
        if isinstance(f, AffinePiece):
            x = f.solve(y)
        elif f.inverse_func is not None:
            x = tuple(as_rational(v) for v in f.inverse_func(np.array([[float(v) for v in y]]))[0])
        else:
            continue
        if F.partition.pieces[i - 1].contains(x):
            return x
    raise NotInImage(f"{tuple(float(v) for v in y)} is not in F(B)")


@dataclass
class PerturbationReport:
    c0_gap: Fraction
    rate_gap: Fraction
    partition_gap: Fraction
    epsilon: Fraction
    verdict: bool
    empty_overlap_pieces: list[int] = field(default_factory=list)


def _affine_c0_gap(f: AffinePiece, g: AffinePiece, K: BoxCover, metric: Metric) -> Fraction:
    # sup of a norm of an affine map over a box is attained at a corner
    best = Fraction(0)
    for box in K:
        for c in box.corners():
            fx, gx = f(c), g(c)
            best = max(best, metric.norm_bounds([a - b for a, b in zip(fx, gx)])[1])
    return best


def _sampled_c0_gap(f: PieceMap, g: PieceMap, K: BoxCover, metric: Metric, lf, lg, eps: Fraction, samples: int) -> Fraction:
    best = Fraction(0)
    for box in K:
        lo, hi = box.to_float()
        span = max(float(w * metric.weight(a)) for a, w in enumerate(box.widths))
        # mesh chosen so the Lipschitz slack stays <= eps/10
        need = math.ceil(span * float(lf + lg) / max(float(eps) / 10, 1e-300)) + 1
        k = max(samples, min(need, 4096))
        axes = [np.linspace(l, h, k if h > l else 1) for l, h in zip(lo, hi)]
        grid = np.array(list(itertools.product(*axes)))
        gap = float(np.max(metric.norm_float(f.eval_float(grid) - g.eval_float(grid))))
        mesh = metric.norm_bounds([w / max(k - 1, 1) / 2 for w in box.widths])[1]
        best = max(best, Fraction(gap) + (lf + lg) * mesh)
    return best


def is_epsilon_perturbation(F: PiecewiseMap, G: PiecewiseMap, eps, samples: int = 32) -> PerturbationReport:
    eps = as_rational(eps)
    if eps <= 0:
        raise GeometryError("epsilon must be positive")
    if F.m != G.m:
        raise GeometryError(f"piece-count mismatch: {F.m} vs {G.m}")
    metric = F.metric
    lf, lg = F.rate_bound, G.rate_bound
    c0 = Fraction(0)
    empty = []
    for i in range(1, F.m + 1):
        K = F.partition.region(i).intersect(G.partition.region(i))
        if K.is_empty:
            empty.append(i)
            continue
        f, g = F.piece_map(i), G.piece_map(i)
        if isinstance(f, AffinePiece) and isinstance(g, AffinePiece):
            gap = _affine_c0_gap(f, g, K, metric)
        else:
            gap = _sampled_c0_gap(f, g, K, metric, lf, lg, eps, samples)
        c0 = max(c0, gap)
    rate_gap = abs(lf - lg)
    pgap = partition_distance(F.partition, G.partition, metric, eps / 10)
    verdict = c0 < eps and rate_gap < eps and pgap < eps
    return PerturbationReport(c0, rate_gap, pgap, eps, verdict, empty)
