"""JSON documents for instances, trees and solutions.

Parsers reject unknown fields and report the offending field path.  Writers emit
sorted keys so equal objects always produce equal bytes.
"""

from __future__ import annotations

import json
import math
from typing import Any

import numpy as np

from .hst import HstTree, validate_hst
from .instance import Metric, UflInstance, validate_metric


class ParseError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


# metadata keys that any document may carry alongside its payload
META_KEYS = {"manifest"}


def dumps(doc: Any, pretty: bool = False) -> str:
    return json.dumps(doc, sort_keys=True, indent=2 if pretty else None,
                      separators=None if pretty else (",", ":"), allow_nan=False)


def _load(text) -> dict:
    if isinstance(text, (bytes, bytearray)):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseError("", f"not UTF-8: {e}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError("", f"malformed JSON: {e}") from None
    if not isinstance(doc, dict):
        raise ParseError("", "top level must be an object")
    return doc


def _check_keys(doc: dict, allowed: set, path: str = ""):
    for k in doc:
        if k not in allowed and k not in META_KEYS:
            raise ParseError(f"{path}{k}", "unknown field")


def _number(x, path: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
        raise ParseError(path, f"expected a finite number, got {x!r}")
    return float(x)


def _int(x, path: str) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        if isinstance(x, float) and x.is_integer():
            return int(x)
        raise ParseError(path, f"expected an integer, got {x!r}")
    return x


def _matrix(x, path: str, rows: int | None = None) -> np.ndarray:
    if not isinstance(x, list):
        raise ParseError(path, "expected a list of rows")
    if rows is not None and len(x) != rows:
        raise ParseError(path, f"expected {rows} rows, got {len(x)}")
    width = None
    out = []
    for i, row in enumerate(x):
        if not isinstance(row, list):
            raise ParseError(f"{path}[{i}]", "expected a list")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(f"{path}[{i}]", f"expected {width} entries, got {len(row)}")
        out.append([_number(v, f"{path}[{i}][{j}]") for j, v in enumerate(row)])
    return np.array(out, dtype=float).reshape(len(out), width or 0)


def _clients(x, n: int | None, path: str = "clients") -> np.ndarray:
    if not isinstance(x, list):
        raise ParseError(path, "expected a list of counts")
    if n is not None and len(x) != n:
        raise ParseError(path, f"expected {n} entries, got {len(x)}")
    out = [_int(v, f"{path}[{i}]") for i, v in enumerate(x)]
    for i, v in enumerate(out):
        if v < 0:
            raise ParseError(f"{path}[{i}]", f"negative client count {v}")
    return np.array(out, dtype=np.int64)


def _facility_cost(doc: dict) -> float:
    if "facility_cost" not in doc:
        raise ParseError("facility_cost", "missing")
    f = _number(doc["facility_cost"], "facility_cost")
    if f <= 0:
        raise ParseError("facility_cost", "must be positive")
    return f


# -- instances -----------------------------------------------------------------------

INSTANCE_KEYS = {"n", "distances", "coords", "metric", "facility_cost", "clients"}


def parse_instance(text) -> UflInstance:
    doc = _load(text)
    _check_keys(doc, INSTANCE_KEYS)
    if "n" not in doc:
        raise ParseError("n", "missing")
    n = _int(doc["n"], "n")
    if n < 1:
        raise ParseError("n", "need at least one point")
    has_d, has_c = "distances" in doc, "coords" in doc
    if has_d and has_c:
        raise ParseError("distances", "ambiguous metric source: give distances or coords, not both")
    if has_d:
        if "metric" in doc:
            raise ParseError("metric", "only allowed together with coords")
        d = _matrix(doc["distances"], "distances", rows=n)
        if d.shape != (n, n):
            raise ParseError("distances", f"expected an {n}x{n} table")
        metric = Metric(d)
        problems = validate_metric(metric, limit=1)
        if problems:
            v = problems[0]
            raise ParseError("distances", f"{v.kind} violation at {list(v.where)} {v.detail}".rstrip())
    elif has_c:
        if doc.get("metric") != "euclidean":
            raise ParseError("metric", 'coords require "metric": "euclidean"')
        x = _matrix(doc["coords"], "coords", rows=n)
        metric = Metric.from_coords(x)
    else:
        raise ParseError("distances", "missing metric source (distances or coords)")
    f = _facility_cost(doc)
    if "clients" not in doc:
        raise ParseError("clients", "missing")
    clients = _clients(doc["clients"], n)
    return UflInstance(metric, f, clients)


def instance_to_doc(inst: UflInstance) -> dict:
    return {
        "n": inst.n,
        "distances": inst.metric.dist.tolist(),
        "facility_cost": float(inst.facility_cost),
        "clients": [int(c) for c in inst.clients],
    }


def serialize_instance(inst: UflInstance, pretty: bool = False) -> bytes:
    return dumps(instance_to_doc(inst), pretty).encode("utf-8")


def parse_client_doc(text, n_points: int | None = None) -> tuple[float, np.ndarray]:
    """Facility cost and client vector from an instance document.

    The metric fields are optional here: callers that already have a tree only
    need the counts.
    """
    doc = _load(text)
    _check_keys(doc, INSTANCE_KEYS)
    if "distances" in doc or "coords" in doc:
        inst = parse_instance(text)
        f, clients = inst.facility_cost, inst.clients
    else:
        f = _facility_cost(doc)
        if "clients" not in doc:
            raise ParseError("clients", "missing")
        n = _int(doc["n"], "n") if "n" in doc else None
        clients = _clients(doc["clients"], n)
    if n_points is not None and len(clients) != n_points:
        raise ParseError("clients", f"expected {n_points} entries (one per tree point), got {len(clients)}")
    return f, clients


# -- trees ----------------------------------------------------------------------------

TREE_KEYS = {"lambda", "depth", "vertices", "embedding"}
VERTEX_KEYS = {"id", "level", "parent", "point"}


def tree_to_doc(t: HstTree) -> dict:
    return {
        "lambda": float(t.lam),
        "depth": int(t.depth),
        "vertices": [
            {"id": v, "level": int(t.level[v]), "parent": int(t.parent[v]), "point": int(t.point[v])}
            for v in range(t.n_vertices)
        ],
    }


def parse_tree(text) -> HstTree:
    doc = _load(text) if not isinstance(text, dict) else text
    _check_keys(doc, TREE_KEYS)
    for k in ("lambda", "depth", "vertices"):
        if k not in doc:
            raise ParseError(k, "missing")
    lam = _number(doc["lambda"], "lambda")
    if not 1 < lam <= 2:
        raise ParseError("lambda", f"must lie in (1, 2], got {lam}")
    depth = _int(doc["depth"], "depth")
    verts = doc["vertices"]
    if not isinstance(verts, list) or not verts:
        raise ParseError("vertices", "expected a non-empty list")
    V = len(verts)
    level, parent, point = [0] * V, [0] * V, [0] * V
    seen = set()
    for i, vd in enumerate(verts):
        path = f"vertices[{i}]"
        if not isinstance(vd, dict):
            raise ParseError(path, "expected an object")
        _check_keys(vd, VERTEX_KEYS, path + ".")
        for k in VERTEX_KEYS:
            if k not in vd:
                raise ParseError(f"{path}.{k}", "missing")
        vid = _int(vd["id"], f"{path}.id")
        if not 0 <= vid < V or vid in seen:
            raise ParseError(f"{path}.id", f"ids must be a permutation of 0..{V - 1}")
        seen.add(vid)
        level[vid] = _int(vd["level"], f"{path}.level")
        parent[vid] = _int(vd["parent"], f"{path}.parent")
        point[vid] = _int(vd["point"], f"{path}.point")
        if not -1 <= parent[vid] < V:
            raise ParseError(f"{path}.parent", "unknown vertex")
    t = HstTree(lam, depth, level, parent, point)
    problems = validate_hst(t)
    if problems:
        raise ParseError("vertices", problems[0])
    return t


def serialize_tree(t: HstTree, pretty: bool = False) -> bytes:
    return dumps(tree_to_doc(t), pretty).encode("utf-8")


# -- solutions ------------------------------------------------------------------------

SOLUTION_KEYS = {"superset", "open", "assignment", "facility_cost", "connection_cost", "total", "seed"}


def solution_to_doc(superset, open_set, assignment, costs, seed) -> dict:
    return {
        "superset": sorted(int(v) for v in superset),
        "open": sorted(int(v) for v in open_set),
        "assignment": [int(a) for a in assignment],
        "facility_cost": float(costs.facility),
        "connection_cost": float(costs.connection),
        "total": float(costs.total),
        "seed": None if seed is None else int(seed),
    }


def serialize_solution(sol, pretty: bool = False) -> bytes:
    """Any object with ``superset``/``open``/``assignment``/``costs``/``seed`` attributes."""
    doc = solution_to_doc(sol.superset, sol.open, sol.assignment, sol.costs, sol.seed)
    return dumps(doc, pretty).encode("utf-8")


def parse_solution(text) -> dict:
    """Validated solution document as plain Python values."""
    doc = _load(text)
    _check_keys(doc, SOLUTION_KEYS)
    out = {}
    for k in ("superset", "open", "assignment"):
        if k not in doc or not isinstance(doc[k], list):
            raise ParseError(k, "expected a list of integers")
        out[k] = [_int(v, f"{k}[{i}]") for i, v in enumerate(doc[k])]
    for k in ("facility_cost", "connection_cost", "total"):
        if k not in doc:
            raise ParseError(k, "missing")
        out[k] = _number(doc[k], k)
    seed = doc.get("seed")
    out["seed"] = None if seed is None else _int(seed, "seed")
    if not set(out["open"]) <= set(out["superset"]):
        raise ParseError("open", "open facilities must belong to the superset")
    return out
