import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pwcert.certifier import certify
from pwcert.fixtures import FIXTURES, m1, m2, m3
from pwcert.genericity import repair
from pwcert.geometry import Metric
from pwcert.io import (
    RunConfig,
    SpecError,
    atomic_write,
    dumps,
    emit_certificate,
    emit_map_spec,
    emit_repair_bundle,
    load_map_spec,
    map_digest,
    parse_map_spec,
)
from pwcert.pwmap import PiecewiseMap

M1_TEXT = """{
  "format_version": 1,
  "dimension": 1,
  "metric": {"kind": "linf"},
  "ball": {"lo": [0], "hi": [1]},
  "pieces": [{"id": 1, "lo": [0], "hi": [0.5]}, {"id": 2, "lo": [0.5], "hi": [1]}],
  "maps": [
    {"piece_id": 1, "affine": {"matrix": [[0.5]], "offset": [0.1]}},
    {"piece_id": 2, "affine": {"matrix": [[0.5]], "offset": [0.4]}}
  ]
}"""


def spec_with(**changes):
    obj = json.loads(M1_TEXT)
    obj.update(changes)
    return json.dumps(obj)


def test_parse_m1():
    spec = parse_map_spec(M1_TEXT)
    assert spec.map == m1()
    assert spec.map.m == 2 and spec.map.lam == Fraction(1, 2)


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_round_trip_is_byte_identical(name):
    F = FIXTURES[name]()
    text = emit_map_spec(F)
    parsed = parse_map_spec(text)
    assert parsed.map == F
    assert emit_map_spec(parsed) == text


offset = st.fractions(min_value=Fraction(1, 20), max_value=Fraction(1, 5), max_denominator=997)


@settings(max_examples=50, deadline=None)
@given(offset, offset, st.fractions(min_value=Fraction(1, 10), max_value=Fraction(9, 10), max_denominator=997))
def test_round_trip_property(a, b, cut):
    # non-terminating rationals travel as "p/q" strings
    F = PiecewiseMap.affine_1d(0, 1, [cut], [("0.25", a), ("0.25", Fraction(1, 2) + b)])
    text = emit_map_spec(F)
    assert parse_map_spec(text).map == F
    assert emit_map_spec(parse_map_spec(text)) == text


def test_non_terminating_rationals_are_strings():
    F = PiecewiseMap.affine_1d(0, 1, [Fraction(1, 3)], [("0.25", Fraction(1, 7)), ("0.25", "0.6")])
    obj = json.loads(emit_map_spec(F))
    assert obj["pieces"][0]["hi"] == ["1/3"]
    assert obj["maps"][1]["affine"]["offset"] == [0.6]


@pytest.mark.parametrize(
    "text, location, message",
    [
        (spec_with(maps=[{"piece_id": 1, "affine": {"matrix": [[1.2]], "offset": [0]}}, {"piece_id": 2, "affine": {"matrix": [[0.5]], "offset": [0.4]}}]), "maps", "not contractive under linf"),
        (spec_with(pieces=[{"id": 1, "lo": [0], "hi": [0.4]}, {"id": 2, "lo": [0.5], "hi": [1]}]), "pieces", "coverage gap"),
        (spec_with(dimension=2), "ball.lo", "dimension mismatch"),
        (spec_with(format_version=9), "format_version", "unsupported format_version"),
        (spec_with(maps=[{"piece_id": 1, "affine": {"matrix": [[0.5]], "offset": [0.1]}}]), "maps", "no map for pieces [2]"),
        (spec_with(maps=[{"piece_id": 1, "plugin": "tent", "lipschitz": 0.5}, {"piece_id": 2, "affine": {"matrix": [[0.5]], "offset": [0.4]}}]), "maps[0].plugin", "unresolved plugin"),
        (spec_with(metric={"kind": "weighted_linf"}), "metric", "weights"),
        (spec_with(ball={"lo": ["x"], "hi": [1]}), "ball.lo[0]", "expected a number"),
        ('{"format_version": 1,\n  "dimension": 1,,\n}', "line 2:18", "syntax error"),
    ],
)
def test_located_diagnostics(text, location, message):
    with pytest.raises(SpecError) as info:
        parse_map_spec(text)
    assert info.value.location == location
    assert message in info.value.reason


def test_plugins_resolved_by_caller():
    text = spec_with(maps=[
        {"piece_id": 1, "plugin": "half", "lipschitz": 0.5, "injective": True},
        {"piece_id": 2, "affine": {"matrix": [[0.5]], "offset": [0.4]}},
    ])
    spec = parse_map_spec(text, plugins={"half": lambda X: 0.5 * X + 0.1})
    assert spec.plugin_names == ("half", None)
    assert json.loads(emit_map_spec(spec))["maps"][0]["plugin"] == "half"


def test_weighted_metric_round_trip():
    F = m1()
    G = PiecewiseMap(F.partition, F.maps, Metric.weighted(["0.5"]))
    assert parse_map_spec(emit_map_spec(G)).map.metric == G.metric


def test_certificate_document():
    C = certify(m2())
    doc = json.loads(emit_certificate(C, m2()))
    assert doc["status"] == "certified"
    assert doc["k0"] == 2 and doc["d"] == 0.075
    assert doc["map_digest"] == map_digest(m2())
    assert [c["period"] for c in doc["cycles"]] == [2]
    assert doc["epsilon_star_coeffs"] == {"c": 2, "lambda": 0.5}
    # rounded outward: lambda up, distances down
    assert Fraction(doc["epsilon_persist"]) <= C.epsilon_persist


def test_inconclusive_document():
    R = certify(m3(), k_max=20)
    doc = json.loads(emit_certificate(R, m3()))
    assert doc["status"] == "inconclusive"
    assert doc["k_max_tried"] == 20 and doc["min_distance_seen"] == 0


def test_repair_bundle_loads_as_spec(tmp_path):
    R = repair(m3(), "0.04")
    path = tmp_path / "g.json"
    path.write_text(emit_repair_bundle(R, m3()))
    assert load_map_spec(str(path)).map == R.G
    prov = json.loads(path.read_text())["provenance"]
    assert prov["source_digest"] == map_digest(m3())
    assert prov["moved_faces"][0]["old"] == 0.5


def test_load_reports_path(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(spec_with(dimension=0))
    with pytest.raises(SpecError) as info:
        load_map_spec(str(path))
    assert info.value.location.startswith(str(path))
    with pytest.raises(SpecError, match="unreadable"):
        load_map_spec(str(tmp_path / "missing.json"))


def test_atomic_write_replaces(tmp_path):
    path = tmp_path / "out.txt"
    atomic_write(str(path), "one")
    atomic_write(str(path), "two")
    assert path.read_text() == "two"
    assert [p.name for p in tmp_path.iterdir()] == ["out.txt"]


def test_dumps_is_deterministic_and_valid_json():
    obj = {"b": [Fraction(1, 3), 0.1, 2], "a": {"x": None, "y": True}, "c": [[1, 2], [3]]}
    text = dumps(obj, sort_keys=True)
    assert text == dumps(dict(reversed(list(obj.items()))), sort_keys=True)
    assert json.loads(text)["b"] == ["1/3", 0.1, 2]


def test_run_config_rejects_nonpositive_budgets():
    with pytest.raises(ValueError):
        RunConfig(k_max=0)
    with pytest.raises(ValueError):
        RunConfig(fp_tol=-1.0)
    assert RunConfig().atom_budget == 10**6


def test_float_offsets_read_as_decimals():
    spec = parse_map_spec(spec_with(maps=[
        {"piece_id": 1, "affine": {"matrix": [[0.5]], "offset": [0.1]}},
        {"piece_id": 2, "affine": {"matrix": [["1/2"]], "offset": ["2/5"]}},
    ]))
    assert spec.map.maps[0].offset == (Fraction(1, 10),)
    assert spec.map.maps[1].matrix == ((Fraction(1, 2),),)
    assert np.isclose(spec.map.maps[1].eval_float(np.array([[1.0]]))[0, 0], 0.9)
