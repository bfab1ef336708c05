"""Inline compilation: push the whole uncertain query into the backend.

Var terms become scalar-subquery lookups into materialized best-guess tables;
determinism flags and a provenance marker ride along as extra columns, and
``unwrap`` turns a marker back into the query that reproduces its source row.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .algebra import (Cross, PlanError, Project, Select, Table, Union, Unit,
                      output_columns, rid_col)
from .expr import (BestGuessLookup, BoolValue, ColumnRef, Comparison,
                   Constant, FALSE, IsTrue, Not, TRUE, VarTerm, BoolConst,
                   contains_var, is_det, simplify, transform)
from .normalize import NormalForm, prov_expr

RESERVED_PREFIX = "__veil_"


def _sanitize(name):
    return re.sub(r"[^A-Za-z0-9_]", "_", name)


def best_guess_table_name(lens, var):
    return f"{RESERVED_PREFIX}bg_{_sanitize(lens)}_{_sanitize(var)}"


# ---------------------------------------------------------------------------
# Best-guess materialization
# ---------------------------------------------------------------------------

def materialize_best_guesses(lens_def, backend):
    """One table per lens variable, one row per observed instance.

    Re-running refreshes unaccepted guesses and leaves acknowledged rows
    (accepted or overridden) untouched.
    """
    tables = []
    for var, model in lens_def.models.items():
        table = best_guess_table_name(lens_def.name, var)
        insts = model.instances()
        arity = max((len(i.args) for i in insts), default=0)
        params = [f"param{k + 1}" for k in range(arity)]
        cols = ", ".join([f'"{p}" TEXT' for p in params] +
                         ['"value"', '"accepted" INTEGER NOT NULL DEFAULT 0',
                          '"override"'])
        pk = f', PRIMARY KEY ({", ".join(params)})' if params else ""
        backend.execute(f'CREATE TABLE IF NOT EXISTS "{table}" ({cols}{pk})')
        existing = {}
        sel = ", ".join([f'"{p}"' for p in params] + ["accepted"])
        for row in backend.execute(f'SELECT {sel} FROM "{table}"'):
            existing[tuple(row[:arity])] = row[arity]
        for inst in insts:
            key = tuple(str(a) for a in inst.args)
            guess = model.get_best_guess(inst)
            if key not in existing:
                ph = ", ".join("?" for _ in range(arity + 1))
                backend.execute(
                    f'INSERT INTO "{table}" VALUES ({ph}, 0, NULL)',
                    key + (guess,))
            elif not existing[key]:
                where = " AND ".join(f'"{p}" = ?' for p in params) or "1"
                backend.execute(
                    f'UPDATE "{table}" SET value = ? WHERE {where}',
                    (guess,) + key)
        tables.append(table)
    return tables


def accepted_flag_formula(term: VarTerm):
    """Backend-evaluable test that the instance has been acknowledged."""
    return Comparison(
        "=",
        BestGuessLookup(best_guess_table_name(term.lens, term.name),
                        term.args, "accepted"),
        Constant(1))


def inline_var_exprs(e):
    """Replace each Var term by its best-guess lookup (override wins)."""

    def step(n):
        if isinstance(n, VarTerm):
            for a in n.args:
                if contains_var(a):
                    raise PlanError(f"nested Var in arguments of {n!r}")
            return BestGuessLookup(
                best_guess_table_name(n.lens, n.name), n.args, "value")
        return n

    return transform(e, step)


def inline_vars(nf: NormalForm):
    """Fully deterministic, backend-executable tree for nf's best-guess
    result (data columns only; no annotation columns)."""
    dq = nf.det_query
    cond = simplify(inline_var_exprs(nf.condition))
    if cond != TRUE:
        dq = Select(cond, dq)
    targets = tuple((a, simplify(inline_var_exprs(e))) for a, e in nf.targets)
    return Project(targets, dq)


# ---------------------------------------------------------------------------
# Determinism + provenance annotation
# ---------------------------------------------------------------------------

ROW_DET_COL = "_rdet"
PROV_COL = "_prov"


@dataclass(frozen=True)
class DetAnnotatedQuery:
    query: object               # OperatorTree, fully backend-executable
    attrs: tuple                # user-visible attribute names, in order
    det_columns: dict           # attr -> column name, or a bool constant
    row_det_column: object      # column name, or a bool constant
    provenance_column: str


def _const_bool(d):
    if d == TRUE:
        return True
    if d == FALSE:
        return False
    return None


def build_inline_plan(nf: NormalForm, acknowledged=True):
    """Annotated backend query: best-guess data columns, one determinism
    column per data-dependent attribute, a row-determinism column, and the
    provenance marker.

    ``acknowledged`` consults acceptance flags stored beside the best
    guesses, so Fix/Approve flips determinism without recompilation.
    """
    var_det = accepted_flag_formula if acknowledged else None
    targets = []
    det_cols = {}
    for i, (a, e) in enumerate(nf.targets):
        targets.append((a, simplify(inline_var_exprs(e))))
        d = is_det(e, var_det)
        c = _const_bool(d)
        if c is None:
            name = f"_det_{i}"
            det_cols[a] = name
            targets.append((name, BoolValue(d)))
        else:
            det_cols[a] = c
    rdet = is_det(nf.condition, var_det)
    c = _const_bool(rdet)
    if c is None:
        targets.append((ROW_DET_COL, BoolValue(rdet)))
        row_det = ROW_DET_COL
    else:
        row_det = c
    targets.append((PROV_COL, prov_expr(nf.det_query)))

    dq = nf.det_query
    cond = simplify(inline_var_exprs(nf.condition))
    if cond != TRUE:
        dq = Select(cond, dq)
    return DetAnnotatedQuery(Project(tuple(targets), dq),
                             tuple(a for a, _ in nf.targets),
                             det_cols, row_det, PROV_COL)


def rewrite_determinism(nf: NormalForm, acknowledged=True):
    return build_inline_plan(nf, acknowledged)


def rewrite_provenance(q):
    """Thread a provenance marker column through a deterministic tree."""
    targets = tuple((c, ColumnRef(c)) for c in output_columns(q))
    return Project(targets + ((PROV_COL, prov_expr(q)),), q)


def missing_rows_predicate(nf: NormalForm, acknowledged=True):
    """Rows excluded from the best-guess result whose exclusion is uncertain:
    the best-guess condition does not hold AND the condition is not
    deterministic on the row."""
    from .expr import And
    var_det = accepted_flag_formula if acknowledged else None
    cond = simplify(inline_var_exprs(nf.condition))
    rdet = is_det(nf.condition, var_det)
    return simplify(And(Not(IsTrue(cond)), Not(IsTrue(rdet))))


def count_missing_rows(nf: NormalForm, backend, acknowledged=True):
    from .frontend import render_sql
    pred = missing_rows_predicate(nf, acknowledged)
    if pred == FALSE:
        return 0
    q = Select(pred, nf.det_query)
    sql = f"SELECT COUNT(*) FROM ({render_sql(q)})"
    return backend.execute(sql).fetchone()[0]


# ---------------------------------------------------------------------------
# Provenance markers and unwrap
# ---------------------------------------------------------------------------

class MarkerError(Exception):
    """Marker text does not fit the query's shape (stale or corrupt)."""


def split_cross_marker(m):
    if not m.startswith("("):
        raise MarkerError(f"expected '(' in marker {m!r}")
    depth = 0
    for i, ch in enumerate(m):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth == 0:
                left = m[1:i]
                rest = m[i + 1:]
                if not (rest.startswith("(") and rest.endswith(")")):
                    raise MarkerError(f"malformed cross marker {m!r}")
                return left, rest[1:-1]
    raise MarkerError(f"unbalanced marker {m!r}")


def split_union_marker(m):
    if m.endswith("+1"):
        return m[:-2], 1
    if m.endswith("+2"):
        return m[:-2], 2
    raise MarkerError(f"expected union tag in marker {m!r}")


def unwrap(det_query, marker):
    """Query computing exactly the source row a marker points at."""
    if isinstance(det_query, Project):
        return Project(det_query.targets, unwrap(det_query.src, marker))
    if isinstance(det_query, Select):
        return Select(det_query.pred, unwrap(det_query.src, marker))
    if isinstance(det_query, Cross):
        lm, rm = split_cross_marker(marker)
        return Cross(unwrap(det_query.lhs, lm), unwrap(det_query.rhs, rm))
    if isinstance(det_query, Union):
        inner, side = split_union_marker(marker)
        branch = det_query.lhs if side == 1 else det_query.rhs
        return unwrap(branch, inner)
    if isinstance(det_query, Table):
        if not re.fullmatch(r"\d+", marker):
            raise MarkerError(f"expected a rowid, got {marker!r}")
        return Select(Comparison("=", ColumnRef(rid_col(det_query.alias)),
                                 Constant(int(marker))), det_query)
    if isinstance(det_query, Unit):
        if marker != "0":
            raise MarkerError(f"expected '0' for the unit relation, got {marker!r}")
        return det_query
    raise PlanError(f"cannot unwrap {type(det_query).__name__}")
