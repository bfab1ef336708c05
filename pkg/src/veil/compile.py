"""Compile expression trees to Python closures over backend row tuples.

The per-row shim loops are the hot path for the streaming strategies, so
instead of walking the tree per row we generate one Python function per
expression.  Semantics match ``expr.eval_concrete`` exactly.
"""
from __future__ import annotations

import ast

from . import values as V
from .expr import (Arith, BestGuessLookup, BoolConst, BoolValue, CastText,
                   ColumnRef, Comparison, Concat, Conditional, Constant,
                   ExprError, IsFalse, IsNull, IsTrue, Not, And, Or, RowIdRef,
                   ROWID_KEY, VarInstance, VarTerm)


def _concat(parts):
    out = []
    for p in parts:
        t = V.to_text(p)
        if t is None:
            return None
        out.append(t)
    return "".join(out)


_NOLIT = object()


def _literal(src):
    """The constant a generated fragment denotes, or _NOLIT."""
    try:
        return ast.literal_eval(src)
    except (ValueError, SyntaxError):
        return _NOLIT


_ENV = {
    "_ar": V.arith,
    "_cmp": V.compare,
    "_and3": V.and3,
    "_or3": V.or3,
    "_not3": V.not3,
    "_tt": V.to_text,
    "_b2i": V.bool_to_int,
    "_cc": _concat,
    "_VI": VarInstance,
}


def _gen(e, colmap, consts):
    g = lambda x: _gen(x, colmap, consts)
    if isinstance(e, Constant):
        if e.value is None or isinstance(e.value, (int, float, str)):
            return repr(e.value)
        consts.append(e.value)
        return f"_k{len(consts) - 1}"
    if isinstance(e, ColumnRef):
        if e.name not in colmap:
            raise ExprError(f"unbound column {e.name!r}")
        return f"r[{colmap[e.name]}]"
    if isinstance(e, RowIdRef):
        if ROWID_KEY not in colmap:
            raise ExprError("unbound ROWID")
        return f"r[{colmap[ROWID_KEY]}]"
    if isinstance(e, Arith):
        return f"_ar({e.op!r}, {g(e.lhs)}, {g(e.rhs)})"
    if isinstance(e, Conditional):
        cond = g(e.cond)
        lit = _literal(cond)
        if lit is not _NOLIT:
            # fold now: "(literal) is True" trips a SyntaxWarning
            return g(e.then if lit is True else e.otherwise)
        return f"(({g(e.then)}) if ({cond}) is True else ({g(e.otherwise)}))"
    if isinstance(e, VarTerm):
        args = ", ".join(g(a) for a in e.args)
        trail = "," if e.args else ""
        return f"_v(_VI({e.lens!r}, {e.name!r}, ({args}{trail})))"
    if isinstance(e, Concat):
        inner = ", ".join(g(p) for p in e.parts)
        return f"_cc(({inner},))"
    if isinstance(e, CastText):
        return f"_tt({g(e.child)})"
    if isinstance(e, BoolValue):
        return f"_b2i({g(e.expr)})"
    if isinstance(e, BestGuessLookup):
        args = ", ".join(g(p) for p in e.params)
        trail = "," if e.params else ""
        return f"_bg({e.table!r}, {e.what!r}, ({args}{trail}))"
    if isinstance(e, Comparison):
        return f"_cmp({e.op!r}, {g(e.lhs)}, {g(e.rhs)})"
    if isinstance(e, And):
        return f"_and3({g(e.lhs)}, {g(e.rhs)})"
    if isinstance(e, Or):
        return f"_or3({g(e.lhs)}, {g(e.rhs)})"
    if isinstance(e, Not):
        return f"_not3({g(e.child)})"
    if isinstance(e, IsNull):
        c = g(e.child)
        lit = _literal(c)
        if lit is not _NOLIT:
            return repr(lit is None)
        return f"(({c}) is None)"
    if isinstance(e, BoolConst):
        return repr(e.value)
    if isinstance(e, IsTrue):
        c = g(e.child)
        lit = _literal(c)
        if lit is not _NOLIT:
            return repr(lit is True)
        return f"(({c}) is True)"
    if isinstance(e, IsFalse):
        c = g(e.child)
        lit = _literal(c)
        if lit is not _NOLIT:
            return repr(lit is False)
        return f"(({c}) is False)"
    raise ExprError(f"cannot compile {type(e).__name__}")


def compile_expr(e, colmap):
    """Return f(row_tuple, var_resolver=None, bg_lookup=None) evaluating e.

    colmap maps column names (and optionally ROWID_KEY) to tuple positions.
    The resolver takes a VarInstance and returns its value; bg_lookup takes
    (table, what, params) and answers best-guess table lookups.
    """
    consts = []
    body = _gen(e, colmap, consts)
    env = dict(_ENV)
    for i, k in enumerate(consts):
        env[f"_k{i}"] = k
    src = f"def _f(r, _v=None, _bg=None):\n    return {body}\n"
    ns = {}
    exec(compile(src, "<veil-expr>", "exec"), env, ns)
    return ns["_f"]


def compile_predicate(e, colmap):
    """Like compile_expr but collapses to strict truth (unknown -> False)."""
    f = compile_expr(e, colmap)
    return lambda r, v=None, bg=None: f(r, v, bg) is True
