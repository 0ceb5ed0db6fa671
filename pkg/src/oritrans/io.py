"""JSON encoding of instances, currents, measures, families, forests and certificates.

Coordinates are written as integers or rational strings such as ``"3/2"``;
real coefficients are plain JSON numbers.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .calibration import CalibrationCertificate
from .coefficients import Alpha, NormSpec, PhiNorm
from .currents import AtomicMeasure0, MailingInstance, PairOrdering, PolyCurrent1
from .geometry import Polyline, Segment, format_point, to_point
from .mailing import LabeledPath, PathFamily
from .steiner import Forest, PartitionedInstance


class InvalidInput(ValueError):
    """A JSON document does not describe a valid object."""


def _num(x):
    if isinstance(x, Fraction):
        return int(x) if x.denominator == 1 else str(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    return int(x)


def _coef(c, ring: str) -> tuple:
    if ring == "int":
        out = []
        for x in c:
            v = Fraction(str(x))
            if v.denominator != 1:
                raise InvalidInput(f"non-integer coefficient {x!r}")
            out.append(int(v))
        return tuple(out)
    return tuple(float(Fraction(x)) if isinstance(x, str) else float(x) for x in c)


def point_from_json(p):
    if not isinstance(p, (list, tuple)):
        raise InvalidInput(f"a point is an array of coordinates, got {p!r}")
    try:
        return to_point(p)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise InvalidInput(str(exc)) from None


# -- norms ---------------------------------------------------------------------


def norm_from_json(obj) -> NormSpec:
    try:
        return NormSpec.from_json(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInput(f"bad norm {obj!r}: {exc}") from None


def phi_alpha_from_json(obj) -> tuple[PhiNorm, Alpha]:
    """phi and alpha from either ``{"phi":..,"alpha":..}`` or a phi_alpha norm object."""
    if obj is None:
        raise InvalidInput("the instance needs a cost: phi and alpha")
    src = obj.get("norm", obj)
    try:
        phi = src["phi"]
        if phi == "lr":
            phi = PhiNorm("lr", float(Fraction(str(src["r"]))))
        return PhiNorm.parse(phi), Alpha.of(Fraction(str(src["alpha"])))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInput(f"bad cost specification: {exc}") from None


# -- measures and currents ------------------------------------------------------


def measure_to_json(B: AtomicMeasure0) -> dict:
    return {"m": B.m, "atoms": [{"point": format_point(p), "coef": [_num(x) for x in c]} for p, c in B.atoms]}


def measure_from_json(obj) -> AtomicMeasure0:
    try:
        m = int(obj["m"])
        pairs = [(point_from_json(a["point"]), _coef(a["coef"], "real" if any(isinstance(x, float) for x in a["coef"]) else "int"))
                 for a in obj["atoms"]]
        return AtomicMeasure0.build(m, pairs)
    except (KeyError, TypeError) as exc:
        raise InvalidInput(f"bad measure: {exc}") from None


def current_to_json(T: PolyCurrent1) -> dict:
    return {"m": T.m, "ring": T.ring,
            "atoms": [{"a": format_point(s.a), "b": format_point(s.b), "coef": [_num(x) for x in c]}
                      for s, c in T.atoms]}


def current_from_json(obj) -> PolyCurrent1:
    try:
        m, ring = int(obj["m"]), obj.get("ring", "int")
        if ring not in ("int", "real"):
            raise InvalidInput(f"unknown ring {ring!r}")
        pieces = []
        for a in obj["atoms"]:
            c = _coef(a["coef"], ring)
            if len(c) != m:
                raise InvalidInput(f"coefficient of length {len(c)} in a current with m = {m}")
            pieces.append((Segment(point_from_json(a["a"]), point_from_json(a["b"])), c))
        return PolyCurrent1.build(m, pieces, ring)
    except (KeyError, TypeError) as exc:
        raise InvalidInput(f"bad current: {exc}") from None
    except ValueError as exc:
        if isinstance(exc, InvalidInput):
            raise
        raise InvalidInput(str(exc)) from None


# -- instances -----------------------------------------------------------------


def mailing_to_json(inst: MailingInstance) -> dict:
    return {"kind": "mailing", "points": [format_point(p) for p in inst.points],
            "matrix": [list(row) for row in inst.G]}


def steiner_to_json(inst: PartitionedInstance) -> dict:
    return {"kind": "steiner", "points": [format_point(p) for p in inst.points],
            "partition": [list(g) for g in inst.partition]}


@dataclass
class InstanceFile:
    kind: str
    instance: object
    norm: dict | None = None
    solver: dict = field(default_factory=dict)


def instance_from_json(obj) -> InstanceFile:
    if not isinstance(obj, dict):
        raise InvalidInput("an instance file is a JSON object")
    kind = obj.get("kind")
    try:
        points = [point_from_json(p) for p in obj["points"]]
        if kind == "mailing":
            G = obj["matrix"]
            if any(not isinstance(x, int) or isinstance(x, bool) for row in G for x in row):
                raise InvalidInput("matrix entries must be integers")
            inst = MailingInstance.of(points, G)
        elif kind == "steiner":
            inst = PartitionedInstance.of(points, obj["partition"])
        else:
            raise InvalidInput(f"unknown instance kind {kind!r}")
    except KeyError as exc:
        raise InvalidInput(f"missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidInput):
            raise
        raise InvalidInput(str(exc)) from None
    return InstanceFile(kind, inst, obj.get("norm"), dict(obj.get("solver", {})))


# -- families, forests, orderings --------------------------------------------------


def family_to_json(F: PathFamily) -> dict:
    return {"instance": mailing_to_json(F.instance),
            "paths": [{"commodity": list(lp.commodity), "vertices": [format_point(v) for v in lp.path.vertices]}
                      for lp in F.paths]}


def family_from_json(obj, inst: MailingInstance | None = None) -> PathFamily:
    try:
        if inst is None:
            inst = instance_from_json(obj["instance"]).instance
        paths = [LabeledPath(tuple(int(x) for x in p["commodity"]),
                             Polyline.of([point_from_json(v) for v in p["vertices"]])) for p in obj["paths"]]
    except KeyError as exc:
        raise InvalidInput(f"missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        raise InvalidInput(str(exc)) from None
    return PathFamily(inst, tuple(paths))


def forest_to_json(K: Forest) -> dict:
    return {"vertices": [format_point(p) for p in K.vertices], "edges": [list(e) for e in K.edges]}


def forest_from_json(obj) -> Forest:
    try:
        verts = tuple(point_from_json(p) for p in obj["vertices"])
        edges = tuple((int(u), int(v)) for u, v in obj["edges"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInput(f"bad forest: {exc}") from None
    if any(not (0 <= u < len(verts) and 0 <= v < len(verts)) or u == v for u, v in edges):
        raise InvalidInput("forest edges must join two distinct listed vertices")
    return Forest(verts, edges)


def ordering_from_json(obj, inst: MailingInstance) -> PairOrdering:
    try:
        return PairOrdering.from_pairs(inst, [tuple(p) for p in obj])
    except (TypeError, ValueError) as exc:
        raise InvalidInput(f"bad pair ordering: {exc}") from None


def support_from_json(obj) -> list[Segment]:
    segs = obj.get("segments", obj) if isinstance(obj, dict) else obj
    try:
        out = []
        for s in segs:
            a, b = (s["a"], s["b"]) if isinstance(s, dict) else s
            out.append(Segment(point_from_json(a), point_from_json(b)))
        return out
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInput(f"bad support: {exc}") from None


def support_to_json(segments) -> dict:
    return {"segments": [{"a": format_point(s.a), "b": format_point(s.b)} for s in segments]}


# -- certificates ----------------------------------------------------------------


def certificate_to_json(cert: CalibrationCertificate) -> dict:
    cells = []
    for c in cert.cells:
        cell = {"W": c.W.tolist()}
        cell["polygon"] = None if c.polygon is None else [format_point(p) for p in c.polygon]
        cells.append(cell)
    return {"cells": cells, "norm": cert.norm.to_json()}


def certificate_from_json(obj) -> CalibrationCertificate:
    try:
        norm = norm_from_json(obj["norm"])
        cells = []
        for c in obj["cells"]:
            poly = c.get("polygon")
            cells.append((None if poly is None else [point_from_json(p) for p in poly], c["W"]))
        return CalibrationCertificate.build(cells, norm)
    except KeyError as exc:
        raise InvalidInput(f"missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidInput):
            raise
        raise InvalidInput(f"bad certificate: {exc}") from None


# -- files -----------------------------------------------------------------------


def load(path) -> object:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"cannot read {path}: {exc}") from None


def dump(obj, path=None) -> str:
    text = json.dumps(obj, indent=2, default=_num)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text
