"""Lens expansion and reduction to normal form: shim F over deterministic Q.

The normal form splits any operator tree into a Var-free backend query
(det_query) plus a composite projection/selection F (targets, condition)
applied row-by-row in the shim.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

from .algebra import (Cross, LensRef, PlanError, Project, Select, Table, Union,
                      Unit, OperatorTree, output_columns, rid_col, scoped)
from .expr import (And, BoolConst, CastText, ColumnRef, Comparison, Concat,
                   Conditional, Constant, Not, Or, RowIdRef, TRUE, VarTerm,
                   conjoin, conjuncts, contains_var, eval_lazy, is_det,
                   simplify, transform, walk, _node)


class CompileError(Exception):
    pass


class UnknownLensError(CompileError):
    pass


@dataclass(frozen=True)
class NormalForm:
    targets: tuple  # of (attr, NumExpr)
    condition: object  # BoolExpr
    det_query: OperatorTree

    @property
    def attrs(self):
        return [a for a, _ in self.targets]

    def recompose(self):
        return Project(self.targets, Select(self.condition, self.det_query))


# ---------------------------------------------------------------------------
# Lens expansion
# ---------------------------------------------------------------------------

def expand_lenses(q, catalog):
    """Replace every LensRef with its defining tree and wrap base tables so
    every leaf exposes uniquely named columns plus an explicit row identifier."""
    counter = itertools.count(1)

    def rec(t):
        if isinstance(t, Table):
            cols = catalog.table_columns(t.name)
            if cols is None:
                raise CompileError(f"unknown table {t.name!r}")
            alias = f"t{next(counter)}"
            base = Table(t.name, alias, tuple(cols))
            targets = [(c, ColumnRef(scoped(c, alias))) for c in cols]
            if "rowid" not in cols:
                # explicit row identifier so queries may reference it
                targets.append(("rowid", ColumnRef(rid_col(alias))))
            return Project(tuple(targets), base)
        if isinstance(t, LensRef):
            d = catalog.lens(t.name)
            if d is None:
                raise UnknownLensError(f"unknown lens {t.name!r}")
            return rec(d.body)
        if isinstance(t, Project):
            return Project(t.targets, rec(t.src))
        if isinstance(t, Select):
            return Select(t.pred, rec(t.src))
        if isinstance(t, Cross):
            return Cross(rec(t.lhs), rec(t.rhs))
        if isinstance(t, Union):
            return Union(rec(t.lhs), rec(t.rhs), t.src_col)
        if isinstance(t, Unit):
            return t
        raise PlanError(f"cannot expand {type(t).__name__}")

    return rec(q)


# ---------------------------------------------------------------------------
# Provenance expression over a deterministic tree's output columns
# ---------------------------------------------------------------------------

def prov_expr(q):
    """String expression identifying the source rows of each output row."""
    if isinstance(q, Table):
        return CastText(ColumnRef(rid_col(q.alias)))
    if isinstance(q, Unit):
        return Constant("0")
    if isinstance(q, Select):
        return prov_expr(q.src)
    if isinstance(q, Project):
        inner = prov_expr(q.src)
        rename = {e.name: a for a, e in q.targets if isinstance(e, ColumnRef)}

        def step(n):
            if isinstance(n, ColumnRef):
                if n.name not in rename:
                    raise PlanError(f"provenance column {n.name!r} not projected")
                return ColumnRef(rename[n.name])
            return n

        return transform(inner, step)
    if isinstance(q, Cross):
        return Concat((Constant("("), prov_expr(q.lhs), Constant(")("),
                       prov_expr(q.rhs), Constant(")")))
    if isinstance(q, Union):
        if not q.src_col:
            raise PlanError("union lacks a discriminator column")
        return Conditional(
            Comparison("=", ColumnRef(q.src_col), Constant(1)),
            Concat((prov_expr(q.lhs), Constant("+1"))),
            Concat((prov_expr(q.rhs), Constant("+2"))))
    raise PlanError(f"no provenance for {type(q).__name__}")


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------

def _det(e):
    return simplify(is_det(e)) == TRUE


def segment_condition(phi):
    """Split a conjunction into (deterministic part, residual part)."""
    det, var = [], []
    for c in conjuncts(simplify(phi)):
        (det if _det(c) else var).append(c)
    return conjoin(det), conjoin(var)


def normalize(q):
    """Rewrite a lens-expanded tree into NormalForm, bottom-up."""
    counter = itertools.count(1)

    def rec(t):
        if isinstance(t, Table):
            if not t.alias:
                raise PlanError(f"table {t.name!r} was not expanded")
            targets = tuple((c, ColumnRef(c)) for c in output_columns(t))
            return NormalForm(targets, TRUE, t)
        if isinstance(t, Unit):
            return NormalForm((), TRUE, t)
        if isinstance(t, LensRef):
            raise PlanError(f"lens {t.name!r} was not expanded")

        if isinstance(t, Project):
            nf = rec(t.src)
            binding = {a: e for a, e in nf.targets}
            rid = prov_expr(nf.det_query)
            new_targets = []
            for a, e in t.targets:
                for node in walk(e):
                    if isinstance(node, ColumnRef) and node.name not in binding:
                        raise CompileError(f"unknown column {node.name!r}")
                new_targets.append((a, eval_lazy(e, cols=binding, rowid=rid)))
            return NormalForm(tuple(new_targets), nf.condition, nf.det_query)

        if isinstance(t, Select):
            nf = rec(t.src)
            binding = {a: e for a, e in nf.targets}
            rid = prov_expr(nf.det_query)
            psi = eval_lazy(t.pred, cols=binding, rowid=rid)
            det_terms, var_terms_ = [], []
            for c in conjuncts(psi):
                (det_terms if _det(c) else var_terms_).append(c)
            dq = nf.det_query
            psi_det = conjoin(det_terms)
            if psi_det != TRUE:
                dq = Select(psi_det, dq)
            cond = simplify(And(nf.condition, conjoin(var_terms_)))
            return NormalForm(nf.targets, cond, dq)

        if isinstance(t, Cross):
            l, r = rec(t.lhs), rec(t.rhs)
            left_names = {a for a, _ in l.targets}
            rt = []
            for a, e in r.targets:
                rt.append((f"r2.{a}" if a in left_names else a, e))
            return NormalForm(tuple(l.targets) + tuple(rt),
                              simplify(And(l.condition, r.condition)),
                              Cross(l.det_query, r.det_query))

        if isinstance(t, Union):
            l, r = rec(t.lhs), rec(t.rhs)
            if [a for a, _ in l.targets] != [a for a, _ in r.targets]:
                raise CompileError(
                    "union of non-identical schemas: "
                    f"{[a for a, _ in l.targets]} vs {[a for a, _ in r.targets]}")
            src = f"_src_{next(counter)}"
            lcols = output_columns(l.det_query)
            rcols = output_columns(r.det_query)
            order = lcols + rcols + [src]
            lproj, rproj = [], []
            for c in order:
                if c == src:
                    lproj.append((c, Constant(1)))
                    rproj.append((c, Constant(2)))
                elif c in lcols:
                    lproj.append((c, ColumnRef(c)))
                    rproj.append((c, Constant(None)))
                else:
                    lproj.append((c, Constant(None)))
                    rproj.append((c, ColumnRef(c)))
            dq = Union(Project(tuple(lproj), l.det_query),
                       Project(tuple(rproj), r.det_query), src_col=src)
            is_left = Comparison("=", ColumnRef(src), Constant(1))
            rmap = dict(r.targets)
            targets = tuple(
                (a, simplify(Conditional(is_left, el, rmap[a])))
                for a, el in l.targets)
            cond = simplify(Or(And(is_left, l.condition),
                               And(Not(is_left), r.condition)))
            return NormalForm(targets, cond, dq)

        raise PlanError(f"cannot normalize {type(t).__name__}")

    nf = rec(q)
    _check_purity(nf.det_query)
    return nf


def _check_purity(q):
    from .algebra import tree_walk, expressions_of
    for t in tree_walk(q):
        if isinstance(t, LensRef):
            raise PlanError("lens reference survived normalization")
    for e in expressions_of(q):
        if contains_var(e):
            raise PlanError("Var term leaked into the deterministic query")
