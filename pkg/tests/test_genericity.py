from fractions import Fraction

import pytest

from oracles import periodic_orbit
from pwcert.atoms import refine_atoms
from pwcert.certifier import Certificate, certify
from pwcert.fixtures import m1, m3, planar
from pwcert.genericity import (
    ExtensionError,
    RepairFailed,
    extend_map,
    extended_atoms,
    repair,
)
from pwcert.geometry import cover_min_distance
from pwcert.partition import separation_line
from pwcert.pwmap import PiecewiseMap, PluginPiece, is_epsilon_perturbation, validate_map


def test_extension_inflates_pieces():
    E = extend_map(m1(), "0.05")
    assert E.inflation == Fraction(1, 20)
    assert [b.hi[0] for U in E.domains for b in U] == [Fraction(11, 20), 1]
    assert E.epsilon1 == Fraction(1, 20) * Fraction(999, 1000)


def test_extension_shrinks_until_images_separate():
    # at r = 0.4 the extended images of M1 touch; shrinking resolves it
    E = extend_map(m1(), "0.4")
    assert E.inflation < Fraction(2, 5)
    imgs = E.images
    assert cover_min_distance(imgs[0], imgs[1]) > 0


def test_plugin_without_extension_refused():
    F = m1()
    plug = tuple(PluginPiece(f.eval_float, Fraction(1, 2), 1, "p", extends=False) for f in F.maps)
    with pytest.raises(ExtensionError):
        extend_map(PiecewiseMap(F.partition, plug), "0.01")


def test_extended_atoms_cover_ordinary_atoms():
    F = m3()
    E = extend_map(F, "0.04")
    A = extended_atoms(E, 4)
    ordinary = refine_atoms(F, 4).union()
    ext = A.union()
    for b in ordinary:
        assert any(e.contains_box(b) for e in ext)


def test_repair_m3():
    F = m3()
    R = repair(F, "0.04")
    assert isinstance(R.certificate, Certificate)
    assert [c.period for c in R.certificate.cycles] == [1]
    assert R.certificate.cycles[0].points[0][0] == pytest.approx(0.6, abs=1e-9)
    (axis, old, new), = R.moved_faces
    assert axis == 0 and old == Fraction(1, 2) and Fraction(23, 50) < new < Fraction(1, 2)
    assert validate_map(R.G).ok
    assert is_epsilon_perturbation(F, R.G, "0.04").verdict
    assert cover_min_distance(separation_line(R.G.partition), extended_atoms(extend_map(F, "0.04"), R.k_used).union()) > 0


def test_repair_returns_certifiable_maps_unchanged():
    R = repair(planar(), "0.01")
    assert R.moved_faces == [] and R.G == planar()


def test_repair_fails_when_generation_needed_exceeds_k_max():
    with pytest.raises(RepairFailed) as info:
        repair(m3(), "0.0001", k_max=10)
    assert info.value.k_tried > 10


@pytest.mark.parametrize("eps", ["0.02", "0.04", "0.1"])
def test_repaired_map_is_certified_independently(eps):
    R = repair(m3(), eps)
    C = certify(R.G)
    assert isinstance(C, Certificate)
    # depending on the side the cut moves to, 1/2 is or is not a fixed point of G
    for cyc in C.cycles:
        exact = periodic_orbit(R.G, cyc.word_cycle)
        assert R.G.partition.region(cyc.word_cycle[0]).contains(exact[0])
        assert abs(cyc.points[0][0] - float(exact[0][0])) <= cyc.residual
