"""JSON serialization for expressions, operator trees, and lens definitions,
used to persist the lens catalog inside the backend database."""
from __future__ import annotations

from . import expr as E
from . import algebra as A
from .lenses import LensDefinition, model_from_json

_EXPR_TYPES = {c.__name__: c for c in (
    E.Constant, E.ColumnRef, E.RowIdRef, E.Arith, E.Conditional, E.VarTerm,
    E.Concat, E.CastText, E.BoolValue, E.BestGuessLookup, E.Comparison,
    E.And, E.Or, E.Not, E.IsNull, E.BoolConst, E.IsTrue, E.IsFalse)}


def expr_to_json(e):
    t = type(e).__name__
    if isinstance(e, (E.Constant, E.BoolConst)):
        return {"t": t, "v": e.value}
    if isinstance(e, E.ColumnRef):
        return {"t": t, "name": e.name}
    if isinstance(e, E.RowIdRef):
        return {"t": t}
    if isinstance(e, E.Arith):
        return {"t": t, "op": e.op, "k": [expr_to_json(e.lhs), expr_to_json(e.rhs)]}
    if isinstance(e, E.Comparison):
        return {"t": t, "op": e.op, "k": [expr_to_json(e.lhs), expr_to_json(e.rhs)]}
    if isinstance(e, E.VarTerm):
        return {"t": t, "lens": e.lens, "name": e.name,
                "k": [expr_to_json(a) for a in e.args]}
    if isinstance(e, E.BestGuessLookup):
        return {"t": t, "table": e.table, "what": e.what,
                "k": [expr_to_json(p) for p in e.params]}
    return {"t": t, "k": [expr_to_json(c) for c in E.children(e)]}


def expr_from_json(d):
    t = d["t"]
    if t not in _EXPR_TYPES:
        raise ValueError(f"unknown expression type {t!r}")
    kids = [expr_from_json(k) for k in d.get("k", [])]
    if t in ("Constant", "BoolConst"):
        return _EXPR_TYPES[t](d["v"])
    if t == "ColumnRef":
        return E.ColumnRef(d["name"])
    if t == "RowIdRef":
        return E.RowIdRef()
    if t in ("Arith", "Comparison"):
        return _EXPR_TYPES[t](d["op"], *kids)
    if t == "VarTerm":
        return E.VarTerm(d["lens"], d["name"], tuple(kids))
    if t == "BestGuessLookup":
        return E.BestGuessLookup(d["table"], tuple(kids), d["what"])
    if t in ("Concat",):
        return E.Concat(tuple(kids))
    return _EXPR_TYPES[t](*kids)


def tree_to_json(q):
    if isinstance(q, A.Table):
        return {"t": "Table", "name": q.name, "alias": q.alias,
                "cols": list(q.cols)}
    if isinstance(q, A.Unit):
        return {"t": "Unit"}
    if isinstance(q, A.LensRef):
        return {"t": "LensRef", "name": q.name}
    if isinstance(q, A.Project):
        return {"t": "Project",
                "targets": [[a, expr_to_json(e)] for a, e in q.targets],
                "src": tree_to_json(q.src)}
    if isinstance(q, A.Select):
        return {"t": "Select", "pred": expr_to_json(q.pred),
                "src": tree_to_json(q.src)}
    if isinstance(q, A.Cross):
        return {"t": "Cross", "lhs": tree_to_json(q.lhs),
                "rhs": tree_to_json(q.rhs)}
    if isinstance(q, A.Union):
        return {"t": "Union", "lhs": tree_to_json(q.lhs),
                "rhs": tree_to_json(q.rhs), "src_col": q.src_col}
    raise ValueError(f"cannot serialize {type(q).__name__}")


def tree_from_json(d):
    t = d["t"]
    if t == "Table":
        return A.Table(d["name"], d["alias"], tuple(d["cols"]))
    if t == "Unit":
        return A.Unit()
    if t == "LensRef":
        return A.LensRef(d["name"])
    if t == "Project":
        return A.Project(tuple((a, expr_from_json(e)) for a, e in d["targets"]),
                         tree_from_json(d["src"]))
    if t == "Select":
        return A.Select(expr_from_json(d["pred"]), tree_from_json(d["src"]))
    if t == "Cross":
        return A.Cross(tree_from_json(d["lhs"]), tree_from_json(d["rhs"]))
    if t == "Union":
        return A.Union(tree_from_json(d["lhs"]), tree_from_json(d["rhs"]),
                       d["src_col"])
    raise ValueError(f"cannot deserialize tree type {t!r}")


def lens_to_json(d: LensDefinition):
    return {"name": d.name, "kind": d.kind,
            "source_query": tree_to_json(d.source_query),
            "params": [list(p) for p in d.params],
            "body": tree_to_json(d.body),
            "models": {v: m.to_json() for v, m in d.models.items()},
            "model_id": d.model_id}


def lens_from_json(d):
    return LensDefinition(
        name=d["name"], kind=d["kind"],
        source_query=tree_from_json(d["source_query"]),
        params=tuple((p[0], p[1], tuple(p[2])) for p in d["params"]),
        body=tree_from_json(d["body"]),
        models={v: model_from_json(m) for v, m in d["models"].items()},
        model_id=d.get("model_id", ""))
