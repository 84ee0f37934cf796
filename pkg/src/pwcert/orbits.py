"""Forward orbit simulation: the brute-force oracle for certificates.

Float paths treat a state within ``ON_S_TOL`` of a shared face as lying on the
separation line, which over-approximates S.  The exact path (affine maps only)
iterates in rationals with exact piece membership.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import Box, BoxCover, Metric, as_point, as_rational
from .pwmap import OutsideDomain, PiecewiseMap

__all__ = [
    "BranchPolicy",
    "OnSeparationLine",
    "OrbitBranch",
    "ON_S_TOL",
    "estimate_limit_set",
    "estimate_period",
    "iterate_batch",
    "iterate_orbit",
    "orbit_csv",
]

ON_S_TOL = 1e-14


class OnSeparationLine(ValueError):
    pass


@dataclass(frozen=True)
class BranchPolicy:
    kind: str = "lowest_id"
    cap: int = 64

    def __post_init__(self):
        if self.kind not in ("all", "lowest_id", "error_on_S"):
            raise ValueError(f"unknown branch policy {self.kind!r}")
        if self.cap < 1:
            raise ValueError("branch cap must be >= 1")

    @classmethod
    def all(cls, cap: int = 64) -> BranchPolicy:
        return cls("all", cap)

    @classmethod
    def lowest_id(cls) -> BranchPolicy:
        return cls("lowest_id")

    @classmethod
    def error_on_s(cls) -> BranchPolicy:
        return cls("error_on_S")

    @classmethod
    def parse(cls, text: str, cap: int = 64) -> BranchPolicy:
        return cls(text, cap)


@dataclass(frozen=True)
class OrbitBranch:
    points: np.ndarray
    itinerary: tuple[int, ...]
    branched_at: tuple[int, ...]
    truncated: bool = False

    def __len__(self) -> int:
        return len(self.itinerary)


class _FloatPieces:
    """Piece boxes as float arrays for vectorized membership."""

    def __init__(self, F: PiecewiseMap, tol: float):
        self.F = F
        self.tol = tol
        self.boxes = []
        for i in range(1, F.m + 1):
            lo = np.array([b.to_float()[0] for b in F.partition.region(i)])
            hi = np.array([b.to_float()[1] for b in F.partition.region(i)])
            self.boxes.append((lo, hi))
        self.amb_lo, self.amb_hi = F.ambient.to_float()

    def membership(self, X: np.ndarray) -> np.ndarray:
        """Boolean (N, m) matrix: point r is (within tol of) piece i+1."""
        out = np.zeros((len(X), self.F.m), dtype=bool)
        for i, (lo, hi) in enumerate(self.boxes):
            inside = (X[:, None, :] >= lo[None] - self.tol) & (X[:, None, :] <= hi[None] + self.tol)
            out[:, i] = inside.all(axis=2).any(axis=1)
        return out


def iterate_batch(F: PiecewiseMap, X0, steps: int, tol: float = ON_S_TOL):
    """Vectorized lowest-id orbits.

    Returns ``(final_points, itineraries, touched_S)`` where ``touched_S[r]``
    flags rows that met (or nearly met) the separation line and so may have
    other branches.
    """
    X = np.array(X0, dtype=float, copy=True)
    X = X.reshape(len(X), -1)
    fp = _FloatPieces(F, tol)
    itins = np.zeros((len(X), steps), dtype=np.int64)
    touched = np.zeros(len(X), dtype=bool)
    for s in range(steps):
        mem = fp.membership(X)
        cnt = mem.sum(axis=1)
        touched |= cnt != 1
        choice = np.where(cnt > 0, np.argmax(mem, axis=1), 0)
        for i in range(F.m):
            rows = choice == i
            if rows.any():
                X[rows] = F.maps[i].eval_float(X[rows])
        itins[:, s] = choice + 1
    return X, itins, touched


def _pieces_exact(F: PiecewiseMap, x) -> list[int]:
    return F.partition.locate(x)


def iterate_orbit(
    F: PiecewiseMap,
    x0,
    steps: int,
    policy: BranchPolicy | None = None,
    exact: bool = False,
    tol: float = ON_S_TOL,
) -> list[OrbitBranch]:
    """All (or one) future orbit branches of ``x0`` for ``steps`` steps."""
    policy = policy or BranchPolicy.lowest_id()
    if exact:
        if not F.is_affine:
            raise ValueError("exact simulation needs affine pieces")
        x = as_point(x0)
        if not F.ambient.contains(x):
            raise OutsideDomain(f"{tuple(float(v) for v in x)} is outside B")
        locate = lambda p: _pieces_exact(F, p)
        step_fn = lambda i, p: F.piece_map(i)(p)
    else:
        x = np.atleast_1d(np.asarray(x0, dtype=float))
        lo, hi = F.ambient.to_float()
        if x.shape != lo.shape or np.any(x < lo) or np.any(x > hi):
            raise OutsideDomain(f"{x.tolist()} is outside B")
        fp = _FloatPieces(F, tol)
        locate = lambda p: [i + 1 for i in np.flatnonzero(fp.membership(p[None, :])[0])]
        step_fn = lambda i, p: F.piece_map(i).eval_float(p[None, :])[0]

    live = [([x], [], [])]
    truncated = False
    for s in range(steps):
        nxt = []
        for pts, itin, br in live:
            p = pts[-1]
            ids = locate(p)
            if not ids:
                raise OutsideDomain(f"orbit left B at step {s}")
            if len(ids) > 1:
                if policy.kind == "error_on_S":
                    raise OnSeparationLine(f"state at step {s} lies on S (pieces {ids})")
                if policy.kind == "lowest_id":
                    ids = ids[:1]
                br = br + [s]
            for i in ids:
                nxt.append((pts + [step_fn(i, p)], itin + [i], br))
        if len(nxt) > policy.cap:
            nxt = nxt[: policy.cap]
            truncated = True
        live = nxt
    out = []
    for pts, itin, br in live:
        arr = np.array(pts, dtype=object if exact else float)
        out.append(OrbitBranch(arr.reshape(len(pts), -1), tuple(itin), tuple(br), truncated))
    return out


def estimate_period(branch: OrbitBranch, tol: float, metric: Metric | None = None) -> Optional[int]:
    """Least p with dist(x_{j+p}, x_j) <= tol over the last 2p pairs; None if no p <= len/3."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    metric = metric or Metric.linf()
    pts = np.asarray(branch.points, dtype=float)
    L = len(pts)
    if L < 3:
        raise ValueError("branch too short")
    for p in range(1, L // 3 + 1):
        lo = L - 3 * p
        a = pts[lo:L - p]
        b = pts[lo + p:L]
        if np.all(metric.norm_float(b - a) <= tol):
            return p
    return None


def estimate_limit_set(
    F: PiecewiseMap,
    x0,
    burn_in: int,
    samples: int,
    policy: BranchPolicy | None = None,
    resolution: float = 1e-9,
) -> BoxCover:
    """Tiny boxes around the post-burn-in states of every branch."""
    branches = iterate_orbit(F, x0, burn_in + samples, policy)
    pts = np.concatenate([np.asarray(b.points, dtype=float)[burn_in + 1:] for b in branches])
    metric = F.metric
    clusters: list[list[np.ndarray]] = []
    centers: list[np.ndarray] = []
    for p in pts:
        if centers:
            d = metric.norm_float(np.array(centers) - p)
            j = int(np.argmin(d))
            if d[j] <= resolution:
                clusters[j].append(p)
                continue
        centers.append(p)
        clusters.append([p])
    half = as_rational(resolution) / 2
    boxes = []
    for cl in clusters:
        arr = np.array(cl)
        lo = tuple(as_rational(v) - half for v in arr.min(axis=0))
        hi = tuple(as_rational(v) + half for v in arr.max(axis=0))
        boxes.append(Box(lo, hi))
    return BoxCover(tuple(boxes)).canonical()


def orbit_csv(branches: list[OrbitBranch], starts: list[int] | None = None) -> str:
    """Rows ``[start,] step, branch, piece, x0..x{n-1}``; piece is the one applied at that step.

    ``starts`` labels each branch with the index of its initial condition.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    n = np.asarray(branches[0].points).shape[1] if branches else 0
    lead = ["start"] if starts is not None else []
    w.writerow(lead + ["step", "branch", "piece"] + [f"x{a}" for a in range(n)])
    for b, br in enumerate(branches):
        pre = [starts[b]] if starts is not None else []
        for s, pt in enumerate(br.points):
            piece = br.itinerary[s] if s < len(br.itinerary) else ""
            w.writerow(pre + [s, b, piece] + [repr(float(v)) for v in pt])
    return buf.getvalue()
