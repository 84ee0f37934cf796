"""Reference maps used by the tests and demos."""
from __future__ import annotations

from fractions import Fraction

from .geometry import Box
from .partition import Partition
from .pwmap import AffinePiece, PiecewiseMap

__all__ = ["m1", "m2", "m3", "planar", "sheared", "FIXTURES"]


def m1() -> PiecewiseMap:
    """Two attracting fixed points, 0.2 and 0.8."""
    return PiecewiseMap.affine_1d(0, 1, ["0.5"], [("0.5", "0.1"), ("0.5", "0.4")])


def m2() -> PiecewiseMap:
    """One 2-cycle {0.4, 0.8}."""
    return PiecewiseMap.affine_1d(0, 1, ["0.5"], [("0.5", "0.6"), ("0.5", "0")])


def m3() -> PiecewiseMap:
    """The fixed point 0.5 of the left branch sits on the cut; never certifies."""
    return PiecewiseMap.affine_1d(0, 1, ["0.5"], [("0.5", "0.25"), ("0.5", "0.3")])


def planar() -> PiecewiseMap:
    """Unit square split at x=1/2, both pieces 0.4*I plus an offset; one 3-cycle."""
    P = Partition.from_boxes(
        Box((0, 0), (1, 1)),
        [Box((0, 0), ("0.5", 1)), Box(("0.5", 0), (1, 1))],
    )
    k = Fraction(2, 5)
    diag = ((k, 0), (0, k))
    return PiecewiseMap(P, (AffinePiece(diag, ("0.55", "0.05")), AffinePiece(diag, ("0.25", "0.5"))))


def sheared() -> PiecewiseMap:
    """Non-diagonal planar example: rotation-shear contractions on two half squares."""
    P = Partition.from_boxes(
        Box((0, 0), (1, 1)),
        [Box((0, 0), ("0.5", 1)), Box(("0.5", 0), (1, 1))],
    )
    f1 = AffinePiece(((Fraction(3, 10), Fraction(1, 10)), (Fraction(-1, 10), Fraction(3, 10))), ("0.6", "0.2"))
    f2 = AffinePiece(((Fraction(3, 10), Fraction(-1, 10)), (Fraction(1, 10), Fraction(3, 10))), ("0.05", "0.45"))
    return PiecewiseMap(P, (f1, f2))


FIXTURES = {"M1": m1, "M2": m2, "M3": m3, "planar": planar, "sheared": sheared}
