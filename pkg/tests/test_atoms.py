from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import exact_orbit
from pwcert.atoms import (
    AtomBudgetExceeded,
    atom_diameter_bound,
    atoms_to_csv,
    atoms_to_separation_distance,
    refine_atoms,
)
from pwcert.fixtures import m1, m2, m3, planar, sheared
from pwcert.geometry import BoxCover
from pwcert.partition import Partition, separation_line
from pwcert.pwmap import AffinePiece, InvalidMap, PiecewiseMap


@pytest.mark.parametrize("k", range(1, 8))
def test_m1_atoms_are_exact_intervals(k):
    # both branches shrink [0, 1/2] and [1/2, 1] towards their fixed points
    A = refine_atoms(m1(), k)
    assert A.words == [(1,) * k, (2,) * k]
    e1 = A.by_word()[(1,) * k].enclosure.hull()
    e2 = A.by_word()[(2,) * k].enclosure.hull()
    # f1^k([0,1/2]) = 1/5 + (1/2)^k ([0,1/2] - 1/5)
    assert e1.lo[0] == Fraction(1, 5) - Fraction(1, 5) / 2**k and e1.hi[0] == Fraction(1, 5) + Fraction(3, 10) / 2**k
    assert e2.lo[0] == Fraction(4, 5) - Fraction(3, 10) / 2**k and e2.hi[0] == Fraction(4, 5) + Fraction(1, 5) / 2**k


def test_m2_words_respect_admissibility():
    # f1 maps piece 1 into piece 2, so 1 is never followed by 1
    A = refine_atoms(m2(), 4)
    for w in A.words:
        assert all(not (a == b == 1) for a, b in zip(w, w[1:]))


@pytest.mark.parametrize("make", [m1, m2, m3, planar, sheared])
@pytest.mark.parametrize("k", [1, 3, 6])
def test_enclosures_contain_exact_orbits(make, k):
    F = make()
    A = refine_atoms(F, k).by_word()
    rng = np.random.default_rng(k)
    lo, hi = F.ambient.to_float()
    for x in rng.uniform(lo, hi, size=(25, F.dim)):
        x = tuple(Fraction(repr(float(v))) for v in x)
        for itin, pts in exact_orbit(F, x, k):
            assert A[itin].enclosure.contains(pts[-1])


@pytest.mark.parametrize("make", [m1, m2, m3, planar, sheared])
def test_diameter_law(make):
    F = make()
    for k in range(1, 9):
        A = refine_atoms(F, k)
        assert A.diam_bound <= atom_diameter_bound(F, k) + A.resolution


def test_fixed_resolution_subdivides_non_diagonal_maps():
    F = sheared()
    coarse = refine_atoms(F, 2)
    fine = refine_atoms(F, 2, resolution=Fraction(1, 16))
    assert fine.box_count >= coarse.box_count


def test_budget_is_enforced():
    with pytest.raises(AtomBudgetExceeded) as info:
        refine_atoms(sheared(), 3, resolution=Fraction(1, 16), atom_budget=50)
    assert info.value.budget == 50


def test_invalid_map_rejected():
    F = PiecewiseMap.affine_1d(0, 1, ["0.5"], [("0.5", "0.1"), ("0.5", "0.1")])
    with pytest.raises(InvalidMap):
        refine_atoms(F, 1)


def test_separation_distance():
    F = m1()
    S = separation_line(F.partition)
    assert atoms_to_separation_distance(refine_atoms(F, 1), S, F.metric) == Fraction(3, 20)
    single = PiecewiseMap(Partition.intervals(Fraction(0), Fraction(1), []), (AffinePiece.scalar("0.5", "0.25"),))
    assert atoms_to_separation_distance(refine_atoms(single, 1), BoxCover(()), single.metric) == float("inf")


def test_csv_export_brackets_enclosures():
    text = atoms_to_csv(refine_atoms(m2(), 2))
    rows = [r.split(",") for r in text.strip().splitlines()]
    assert rows[0] == ["word", "box", "lo0", "hi0"]
    assert {r[0] for r in rows[1:]} == {"1-2", "2-1", "2-2"}


@settings(max_examples=30, deadline=None)
@given(
    st.fractions(min_value=Fraction(1, 10), max_value=Fraction(9, 10), max_denominator=50),
    st.fractions(min_value=Fraction(1, 20), max_value=Fraction(1, 5), max_denominator=50),
    st.integers(1, 6),
)
def test_enclosures_nested_in_previous_generation_images(cut, shift, k):
    # two contractions with slope 1/4 placed well apart are always valid
    F = PiecewiseMap.affine_1d(0, 1, [cut], [("0.25", shift), ("0.25", Fraction(1, 2) + shift)])
    Ak = refine_atoms(F, k)
    Ak1 = refine_atoms(F, k + 1)
    union = Ak.union()
    for atom in Ak1:
        # F^{k+1}(B) is inside F^k(B)
        for b in atom.enclosure:
            assert any(u.contains_box(b) for u in union)
