"""Map specs, certificates and repair bundles as JSON text.

Numbers are emitted exactly: a rational with a terminating decimal expansion
is written as that decimal (which is also its shortest round-trip form when it
came from a float literal); any other rational is written as a ``"p/q"``
string.  Readers accept both.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from typing import Any, Callable, Mapping, Optional

from .certifier import Certificate, Inconclusive
from .geometry import Box, BoxCover, GeometryError, Metric, q_to_float_down, q_to_float_up
from .partition import Partition, Piece
from .pwmap import AffinePiece, NotContractive, PerturbationReport, PiecewiseMap, PluginPiece, validate_map

__all__ = [
    "FORMAT_VERSION",
    "MapSpec",
    "RunConfig",
    "SpecError",
    "atomic_write",
    "certificate_document",
    "dumps",
    "emit_certificate",
    "emit_map_spec",
    "emit_repair_bundle",
    "inconclusive_document",
    "load_map_spec",
    "map_digest",
    "parse_map_spec",
    "perturbation_document",
]

FORMAT_VERSION = 1


class SpecError(ValueError):
    """Parse or semantic failure, located by ``line:col`` or by a field path."""

    def __init__(self, message: str, location: str = ""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location
        self.reason = message


@dataclass(frozen=True)
class MapSpec:
    map: PiecewiseMap
    format_version: int = FORMAT_VERSION
    plugin_names: tuple[Optional[str], ...] = ()

    @property
    def dimension(self) -> int:
        return self.map.dim


@dataclass(frozen=True)
class RunConfig:
    k_max: int = 64
    atom_budget: int = 10**6
    fp_tol: Optional[float] = None
    resolution: Optional[Fraction] = None
    branch_policy: str = "lowest_id"
    out: Optional[str] = None
    seed: int = 0

    def __post_init__(self):
        if self.k_max < 1 or self.atom_budget < 1:
            raise ValueError("budgets must be positive")
        if self.fp_tol is not None and not self.fp_tol > 0:
            raise ValueError("fp_tol must be positive")
        if self.resolution is not None and not self.resolution > 0:
            raise ValueError("resolution must be positive")


# ---------------------------------------------------------------- emission


def _num(q: Fraction) -> str:
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    d = q.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return json.dumps(f"{q.numerator}/{q.denominator}")
    places = max(twos, fives)
    text = format(Decimal(q.numerator * 10**places // q.denominator).scaleb(-places), "f")
    return text


def _scalar(v: Any) -> str:
    if isinstance(v, bool) or v is None:
        return json.dumps(v)
    if isinstance(v, Fraction):
        return _num(v)
    if isinstance(v, float):
        if not math.isfinite(v):
            return json.dumps(str(v))
        return repr(v)
    if isinstance(v, (int, str)):
        return json.dumps(v)
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _flat(v: Any) -> bool:
    return not isinstance(v, (dict, list, tuple)) or (
        isinstance(v, (list, tuple)) and all(not isinstance(x, (dict, list, tuple)) for x in v)
    )


def dumps(obj: Any, sort_keys: bool = False, indent: int = 2) -> str:
    """Deterministic JSON; lists of scalars stay on one line."""

    def emit(v, level):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if isinstance(v, dict):
            if not v:
                return "{}"
            keys = sorted(v) if sort_keys else list(v)
            items = [f"{pad}{json.dumps(str(k))}: {emit(v[k], level + 1)}" for k in keys]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(v, (list, tuple)):
            if not v:
                return "[]"
            if _flat(v):
                return "[" + ", ".join(_scalar(x) for x in v) + "]"
            return "[\n" + ",\n".join(pad + emit(x, level + 1) for x in v) + "\n" + end + "]"
        return _scalar(v)

    return emit(obj, 0) + "\n"


def _metric_obj(m: Metric) -> dict:
    out: dict = {"kind": m.kind}
    if m.weights is not None:
        out["weights"] = list(m.weights)
    return out


def _map_obj(spec: MapSpec) -> dict:
    F = spec.map
    pieces = []
    for pc in F.partition.pieces:
        boxes = list(pc.region)
        if len(boxes) == 1:
            pieces.append({"id": pc.id, "lo": list(boxes[0].lo), "hi": list(boxes[0].hi)})
        else:
            pieces.append({"id": pc.id, "boxes": [{"lo": list(b.lo), "hi": list(b.hi)} for b in boxes]})
    maps = []
    names = spec.plugin_names or (None,) * F.m
    for i, (f, name) in enumerate(zip(F.maps, names), start=1):
        if isinstance(f, AffinePiece):
            maps.append({"piece_id": i, "affine": {"matrix": [list(r) for r in f.matrix], "offset": list(f.offset)}})
        else:
            maps.append(
                {"piece_id": i, "plugin": name or f.name, "lipschitz": f.lipschitz_bound, "injective": f.injective}
            )
    obj = {
        "format_version": spec.format_version,
        "dimension": F.dim,
        "metric": _metric_obj(F.metric),
        "ball": {"lo": list(F.ambient.lo), "hi": list(F.ambient.hi)},
        "pieces": pieces,
        "maps": maps,
    }
    if F.declared_lambda is not None:
        obj["declared_lambda"] = F.declared_lambda
    return obj


def emit_map_spec(spec: MapSpec | PiecewiseMap) -> str:
    if isinstance(spec, PiecewiseMap):
        spec = MapSpec(spec)
    return dumps(_map_obj(spec))


def map_digest(spec: MapSpec | PiecewiseMap) -> str:
    return hashlib.sha256(emit_map_spec(spec).encode()).hexdigest()


def certificate_document(C: Certificate, F: PiecewiseMap) -> dict:
    return {
        "status": "certified",
        "format_version": FORMAT_VERSION,
        "map_digest": map_digest(F),
        "metric": _metric_obj(C.metric),
        "lambda": q_to_float_up(C.lam),
        "lambda_exact": C.lam,
        "k0": C.k0,
        "d": q_to_float_down(C.d),
        "d_exact": C.d,
        "k_work": C.k_work,
        "fp_tol": C.fp_tol,
        "cycles": [
            {
                "period": c.period,
                "word": list(c.word_cycle),
                "points": [list(p) for p in c.points],
                "residual": c.residual,
            }
            for c in C.cycles
        ],
        "epsilon_persist": q_to_float_down(C.epsilon_persist),
        "epsilon_persist_exact": C.epsilon_persist,
        "epsilon_star_coeffs": {"c": C.epsilon_star_coeffs[0], "lambda": C.epsilon_star_coeffs[1]},
        "budgets_used": dict(C.budgets_used),
    }


def inconclusive_document(R: Inconclusive, F: PiecewiseMap) -> dict:
    return {
        "status": "inconclusive",
        "format_version": FORMAT_VERSION,
        "map_digest": map_digest(F),
        "k_max_tried": R.k_max_tried,
        "min_distance_seen": q_to_float_down(Fraction(R.min_distance_seen)),
        "budget_exhausted": R.budget_exhausted,
    }


def emit_certificate(result: Certificate | Inconclusive, F: PiecewiseMap) -> str:
    if isinstance(result, Certificate):
        return dumps(certificate_document(result, F), sort_keys=True)
    return dumps(inconclusive_document(result, F), sort_keys=True)


def perturbation_document(R: PerturbationReport) -> dict:
    return {
        "c0_gap": R.c0_gap,
        "rate_gap": R.rate_gap,
        "partition_gap": R.partition_gap,
        "epsilon": R.epsilon,
        "verdict": R.verdict,
        "empty_overlap_pieces": list(R.empty_overlap_pieces),
    }


def emit_repair_bundle(result, F: PiecewiseMap) -> str:
    """``{"map": <spec of G>, "provenance": {...}}``; :func:`load_map_spec` reads the map back."""
    prov = {
        "source_digest": map_digest(F),
        "epsilon": result.epsilon,
        "epsilon1": result.epsilon1,
        "k_used": result.k_used,
        "gap_width": result.gap_width,
        "moved_faces": [{"axis": a, "old": old, "new": new} for a, old, new in result.moved_faces],
    }
    return dumps({"map": _map_obj(MapSpec(result.G)), "provenance": prov})


# ---------------------------------------------------------------- parsing


def _rat(v: Any, path: str) -> Fraction:
    if isinstance(v, bool):
        raise SpecError("expected a number", path)
    if isinstance(v, (int, Fraction)):
        return Fraction(v)
    if isinstance(v, str):
        try:
            return Fraction(v.strip())
        except (ValueError, ZeroDivisionError):
            pass
    raise SpecError(f"expected a number, got {v!r}", path)


def _vec(v: Any, path: str, n: Optional[int] = None) -> tuple[Fraction, ...]:
    if not isinstance(v, list):
        raise SpecError("expected a list of numbers", path)
    if n is not None and len(v) != n:
        raise SpecError(f"dimension mismatch: expected {n} entries, got {len(v)}", path)
    return tuple(_rat(x, f"{path}[{i}]") for i, x in enumerate(v))


def _field(obj: dict, key: str, path: str):
    if not isinstance(obj, dict):
        raise SpecError("expected an object", path)
    if key not in obj:
        raise SpecError(f"missing field {key!r}", path)
    return obj[key]


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _parse_map_obj(obj: Any, plugins: Mapping[str, Callable], root: str) -> MapSpec:
    if not isinstance(obj, dict):
        raise SpecError("top level must be an object", root or "$")
    version = _field(obj, "format_version", root)
    if version != FORMAT_VERSION:
        raise SpecError(f"unsupported format_version {version!r}", _join(root, "format_version"))
    n = _field(obj, "dimension", root)
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise SpecError("dimension must be a positive integer", _join(root, "dimension"))

    mpath = _join(root, "metric")
    mobj = obj.get("metric", {"kind": "linf"})
    kind = _field(mobj, "kind", mpath)
    weights = mobj.get("weights")
    try:
        metric = Metric(kind, None if weights is None else _vec(weights, _join(mpath, "weights"), n))
    except GeometryError as exc:
        raise SpecError(str(exc), mpath) from None

    bpath = _join(root, "ball")
    ball = _field(obj, "ball", root)
    ambient = Box(_vec(_field(ball, "lo", bpath), _join(bpath, "lo"), n), _vec(_field(ball, "hi", bpath), _join(bpath, "hi"), n))

    ppath = _join(root, "pieces")
    raw_pieces = _field(obj, "pieces", root)
    if not isinstance(raw_pieces, list) or not raw_pieces:
        raise SpecError("expected a nonempty list of pieces", ppath)
    pieces = {}
    for j, pc in enumerate(raw_pieces):
        path = f"{ppath}[{j}]"
        pid = _field(pc, "id", path)
        if isinstance(pid, bool) or not isinstance(pid, int):
            raise SpecError("piece id must be an integer", _join(path, "id"))
        if pid in pieces:
            raise SpecError(f"duplicate piece id {pid}", _join(path, "id"))
        if "boxes" in pc:
            boxes = []
            for t, b in enumerate(pc["boxes"]):
                bp = f"{path}.boxes[{t}]"
                boxes.append(Box(_vec(_field(b, "lo", bp), _join(bp, "lo"), n), _vec(_field(b, "hi", bp), _join(bp, "hi"), n)))
        else:
            boxes = [Box(_vec(_field(pc, "lo", path), _join(path, "lo"), n), _vec(_field(pc, "hi", path), _join(path, "hi"), n))]
        for b in boxes:
            if b.is_empty:
                raise SpecError("piece box has lo > hi", path)
        pieces[pid] = (BoxCover(tuple(boxes)), path)
    m = len(pieces)
    if sorted(pieces) != list(range(1, m + 1)):
        raise SpecError(f"piece ids must be 1..{m}, got {sorted(pieces)}", ppath)

    fpath = _join(root, "maps")
    raw_maps = _field(obj, "maps", root)
    if not isinstance(raw_maps, list):
        raise SpecError("expected a list of maps", fpath)
    maps: dict[int, Any] = {}
    names: dict[int, Optional[str]] = {}
    for j, mp in enumerate(raw_maps):
        path = f"{fpath}[{j}]"
        pid = _field(mp, "piece_id", path)
        if pid not in pieces:
            raise SpecError(f"piece_id {pid!r} names no piece", _join(path, "piece_id"))
        if pid in maps:
            raise SpecError(f"second map for piece {pid}", _join(path, "piece_id"))
        if "affine" in mp:
            apath = _join(path, "affine")
            aff = mp["affine"]
            rows = _field(aff, "matrix", apath)
            if not isinstance(rows, list) or len(rows) != n:
                raise SpecError(f"dimension mismatch: matrix needs {n} rows", _join(apath, "matrix"))
            matrix = tuple(_vec(r, f"{apath}.matrix[{i}]", n) for i, r in enumerate(rows))
            offset = _vec(_field(aff, "offset", apath), _join(apath, "offset"), n)
            maps[pid] = AffinePiece(matrix, offset)
            names[pid] = None
        elif "plugin" in mp:
            name = mp["plugin"]
            if name not in plugins:
                raise SpecError(f"unresolved plugin {name!r}; the embedding application must supply it", _join(path, "plugin"))
            lip = _rat(_field(mp, "lipschitz", path), _join(path, "lipschitz"))
            maps[pid] = PluginPiece(plugins[name], lip, n, name, bool(mp.get("injective", True)))
            names[pid] = name
        else:
            raise SpecError("map needs an 'affine' or 'plugin' entry", path)
    missing = sorted(set(pieces) - set(maps))
    if missing:
        raise SpecError(f"no map for pieces {missing}", fpath)

    declared = obj.get("declared_lambda")
    declared = None if declared is None else _rat(declared, _join(root, "declared_lambda"))
    P = Partition(ambient, tuple(Piece(i, pieces[i][0]) for i in range(1, m + 1)))
    F = PiecewiseMap(P, tuple(maps[i] for i in range(1, m + 1)), metric, declared)
    _check_semantics(F, root)
    return MapSpec(F, version, tuple(names[i] for i in range(1, m + 1)))


_KIND_FIELD = {
    "ambient": "ball",
    "gap": "pieces",
    "overlap": "pieces",
    "outside": "pieces",
    "degenerate": "pieces",
    "empty": "pieces",
    "ids": "pieces",
    "dimension": "maps",
    "maps": "maps",
    "contraction": "maps",
    "singular": "maps",
    "interior": "maps",
    "separation": "maps",
}

_KIND_TEXT = {"gap": "coverage gap", "overlap": "pieces overlap"}


def _check_semantics(F: PiecewiseMap, root: str) -> None:
    try:
        F.lam
    except NotContractive as exc:
        raise SpecError(str(exc), _join(root, "maps")) from None
    rep = validate_map(F)
    if not rep.ok:
        v = rep.violations[0]
        text = _KIND_TEXT.get(v.kind)
        msg = f"{text}: {v.message}" if text and text not in v.message else v.message
        raise SpecError(msg, _join(root, _KIND_FIELD.get(v.kind, "")))


def parse_map_spec(text: str, plugins: Optional[Mapping[str, Callable]] = None) -> MapSpec:
    """Parse and validate a map spec (or the ``map`` of a repair bundle)."""
    try:
        obj = json.loads(text, parse_float=Fraction)
    except json.JSONDecodeError as exc:
        raise SpecError(f"syntax error: {exc.msg}", f"line {exc.lineno}:{exc.colno}") from None
    root = ""
    if isinstance(obj, dict) and "map" in obj and "provenance" in obj:
        obj, root = obj["map"], "map"
    return _parse_map_obj(obj, plugins or {}, root)


def load_map_spec(path: str, plugins: Optional[Mapping[str, Callable]] = None) -> MapSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise SpecError(f"unreadable spec: {exc.strerror}", path) from None
    try:
        return parse_map_spec(text, plugins)
    except SpecError as exc:
        raise SpecError(exc.reason, f"{path}:{exc.location}" if exc.location else path) from None


def atomic_write(path: str, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".pwcert-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
