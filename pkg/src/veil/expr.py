"""Expression IR: numeric and boolean expression trees with Var terms.

The trees are immutable; every operation here is a pure function.  Three
evaluation modes exist:

* ``eval_lazy`` - partial evaluation under a partial binding; deterministic
  subtrees fold to constants, everything touching an unresolved Var stays
  symbolic.
* ``eval_concrete`` - full evaluation given a row and a Var resolver, with
  SQL three-valued null semantics.
* ``is_det`` - compiles an expression into a Var-free boolean formula that is
  true exactly on the rows where the expression's value does not depend on
  any Var assignment.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Union

from . import values as V

ROWID_KEY = "__rowid__"


class ExprError(Exception):
    """Raised for malformed expressions or unbound atoms."""


# ---------------------------------------------------------------------------
# AST nodes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NumExpr:
    pass


@dataclass(frozen=True)
class BoolExpr:
    pass


Expr = Union[NumExpr, BoolExpr]


@dataclass(frozen=True)
class Constant(NumExpr):
    value: object


@dataclass(frozen=True)
class ColumnRef(NumExpr):
    name: str


@dataclass(frozen=True)
class RowIdRef(NumExpr):
    pass


@dataclass(frozen=True)
class Arith(NumExpr):
    op: str  # + - * /
    lhs: NumExpr
    rhs: NumExpr


@dataclass(frozen=True)
class Conditional(NumExpr):
    cond: BoolExpr
    then: NumExpr
    otherwise: NumExpr


@dataclass(frozen=True)
class VarTerm(NumExpr):
    lens: str
    name: str
    args: tuple = ()  # of NumExpr (skolem parameters)


@dataclass(frozen=True)
class Concat(NumExpr):
    parts: tuple  # of NumExpr


@dataclass(frozen=True)
class CastText(NumExpr):
    child: NumExpr


@dataclass(frozen=True)
class BoolValue(NumExpr):
    """A boolean expression used in value position (materialized as 0/1/NULL)."""

    expr: BoolExpr


@dataclass(frozen=True)
class BestGuessLookup(NumExpr):
    """Keyed lookup into a materialized best-guess table.

    ``what`` selects the projected value:
      value          -> COALESCE(override, value)
      accepted       -> the accepted flag (0/1)
      accepted_value -> COALESCE(override, value) when accepted, else NULL
    """

    table: str
    params: tuple  # of NumExpr
    what: str = "value"


@dataclass(frozen=True)
class Comparison(BoolExpr):
    op: str  # = != < <= > >=
    lhs: NumExpr
    rhs: NumExpr


@dataclass(frozen=True)
class And(BoolExpr):
    lhs: BoolExpr
    rhs: BoolExpr


@dataclass(frozen=True)
class Or(BoolExpr):
    lhs: BoolExpr
    rhs: BoolExpr


@dataclass(frozen=True)
class Not(BoolExpr):
    child: BoolExpr


@dataclass(frozen=True)
class IsNull(BoolExpr):
    child: NumExpr


@dataclass(frozen=True)
class BoolConst(BoolExpr):
    value: object  # True | False | None (unknown)


@dataclass(frozen=True)
class IsTrue(BoolExpr):
    """Strict truth test: unknown maps to false.  Needed because Kleene
    negation does not distinguish false from unknown."""

    child: BoolExpr


@dataclass(frozen=True)
class IsFalse(BoolExpr):
    child: BoolExpr


TRUE = BoolConst(True)
FALSE = BoolConst(False)
UNKNOWN = BoolConst(None)


@dataclass(frozen=True)
class VarInstance:
    """One labeled null: a Var term applied to concrete argument values."""

    lens: str
    name: str
    args: tuple = ()

    def __str__(self):
        inner = ", ".join(repr(a) for a in self.args)
        return f"{self.lens}.{self.name}({inner})"


# ---------------------------------------------------------------------------
# Generic traversal
# ---------------------------------------------------------------------------

def children(e):
    if isinstance(e, Arith):
        return (e.lhs, e.rhs)
    if isinstance(e, Conditional):
        return (e.cond, e.then, e.otherwise)
    if isinstance(e, VarTerm):
        return e.args
    if isinstance(e, Concat):
        return e.parts
    if isinstance(e, CastText):
        return (e.child,)
    if isinstance(e, BoolValue):
        return (e.expr,)
    if isinstance(e, BestGuessLookup):
        return e.params
    if isinstance(e, Comparison):
        return (e.lhs, e.rhs)
    if isinstance(e, (And, Or)):
        return (e.lhs, e.rhs)
    if isinstance(e, Not):
        return (e.child,)
    if isinstance(e, IsNull):
        return (e.child,)
    if isinstance(e, (IsTrue, IsFalse)):
        return (e.child,)
    return ()


def walk(e):
    yield e
    for c in children(e):
        yield from walk(c)


def contains_var(e):
    return any(isinstance(n, VarTerm) for n in walk(e))


def var_terms(e):
    return [n for n in walk(e) if isinstance(n, VarTerm)]


def column_names(e):
    return {n.name for n in walk(e) if isinstance(n, ColumnRef)}


def conjuncts(phi):
    """Flatten a top-level conjunction into a list of terms."""
    if isinstance(phi, And):
        return conjuncts(phi.lhs) + conjuncts(phi.rhs)
    return [phi]


def conjoin(terms):
    out = None
    for t in terms:
        out = t if out is None else And(out, t)
    return TRUE if out is None else out


def disjoin(terms):
    out = None
    for t in terms:
        out = t if out is None else Or(out, t)
    return FALSE if out is None else out


# ---------------------------------------------------------------------------
# Simplification
# ---------------------------------------------------------------------------

def _null_proof(e):
    """True if the boolean expression can never evaluate to unknown."""
    if isinstance(e, (IsNull, IsTrue, IsFalse)):
        return True
    if isinstance(e, BoolConst):
        return e.value is not None
    if isinstance(e, Not):
        return _null_proof(e.child)
    if isinstance(e, (And, Or)):
        return _null_proof(e.lhs) and _null_proof(e.rhs)
    return False


def _node(e):
    """Single bottom-up simplification step; children already simplified."""
    if isinstance(e, Arith):
        if isinstance(e.lhs, Constant) and isinstance(e.rhs, Constant):
            # Division by a folded zero yields the SQL error value: NULL.
            return Constant(V.arith(e.op, e.lhs.value, e.rhs.value))
        return e
    if isinstance(e, Concat):
        parts = []
        for p in e.parts:
            if isinstance(p, Concat):
                parts.extend(p.parts)
            else:
                parts.append(p)
        if all(isinstance(p, Constant) for p in parts):
            vals = [V.to_text(p.value) for p in parts]
            if any(v is None for v in vals):
                return Constant(None)
            return Constant("".join(vals))
        return Concat(tuple(parts))
    if isinstance(e, CastText):
        if isinstance(e.child, Constant):
            return Constant(V.to_text(e.child.value))
        return e
    if isinstance(e, Conditional):
        if isinstance(e.cond, BoolConst):
            return e.then if e.cond.value is True else e.otherwise
        return e
    if isinstance(e, BoolValue):
        if isinstance(e.expr, BoolConst):
            return Constant(V.bool_to_int(e.expr.value))
        return e
    if isinstance(e, Comparison):
        if isinstance(e.lhs, Constant) and isinstance(e.rhs, Constant):
            return BoolConst(V.compare(e.op, e.lhs.value, e.rhs.value))
        return e
    if isinstance(e, IsNull):
        if isinstance(e.child, Constant):
            return BoolConst(e.child.value is None)
        return e
    if isinstance(e, Not):
        if isinstance(e.child, BoolConst):
            return BoolConst(V.not3(e.child.value))
        if isinstance(e.child, Not):
            return e.child.child
        return e
    if isinstance(e, And):
        a, b = e.lhs, e.rhs
        if a == FALSE or b == FALSE:
            return FALSE
        if a == TRUE:
            return b
        if b == TRUE:
            return a
        if isinstance(a, BoolConst) and isinstance(b, BoolConst):
            return BoolConst(V.and3(a.value, b.value))
        return e
    if isinstance(e, Or):
        a, b = e.lhs, e.rhs
        if a == TRUE or b == TRUE:
            return TRUE
        if a == FALSE:
            return b
        if b == FALSE:
            return a
        if isinstance(a, BoolConst) and isinstance(b, BoolConst):
            return BoolConst(V.or3(a.value, b.value))
        return e
    if isinstance(e, IsTrue):
        if isinstance(e.child, BoolConst):
            return BoolConst(e.child.value is True)
        if _null_proof(e.child):
            return e.child
        return e
    if isinstance(e, IsFalse):
        if isinstance(e.child, BoolConst):
            return BoolConst(e.child.value is False)
        if _null_proof(e.child):
            return simplify(Not(e.child))
        return e
    return e


def _rebuild(e, kids):
    if isinstance(e, Arith):
        return Arith(e.op, *kids)
    if isinstance(e, Conditional):
        return Conditional(*kids)
    if isinstance(e, VarTerm):
        return VarTerm(e.lens, e.name, tuple(kids))
    if isinstance(e, Concat):
        return Concat(tuple(kids))
    if isinstance(e, CastText):
        return CastText(*kids)
    if isinstance(e, BoolValue):
        return BoolValue(*kids)
    if isinstance(e, BestGuessLookup):
        return BestGuessLookup(e.table, tuple(kids), e.what)
    if isinstance(e, Comparison):
        return Comparison(e.op, *kids)
    if isinstance(e, And):
        return And(*kids)
    if isinstance(e, Or):
        return Or(*kids)
    if isinstance(e, Not):
        return Not(*kids)
    if isinstance(e, IsNull):
        return IsNull(*kids)
    if isinstance(e, IsTrue):
        return IsTrue(*kids)
    if isinstance(e, IsFalse):
        return IsFalse(*kids)
    return e


def transform(e, fn):
    """Bottom-up rewrite: apply fn to every node after its children."""
    kids = children(e)
    if kids:
        new_kids = tuple(transform(c, fn) for c in kids)
        if new_kids != kids:
            e = _rebuild(e, new_kids)
    return fn(e)


def simplify(e):
    return transform(e, _node)


# ---------------------------------------------------------------------------
# Lazy partial evaluation
# ---------------------------------------------------------------------------

def eval_lazy(e, cols=None, rowid=None, resolve_var=None):
    """Substitute bound atoms, then fold every deterministic subtree.

    cols        -- partial map from column name to replacement NumExpr or value
    rowid       -- replacement expression (or value) for RowIdRef atoms
    resolve_var -- optional VarInstance -> value-or-None hook, applied to Var
                   terms whose arguments fold to constants
    """
    cols = cols or {}

    def wrap(x):
        if isinstance(x, (NumExpr, BoolExpr)):
            return x
        return Constant(x)

    def step(n):
        if isinstance(n, ColumnRef) and n.name in cols:
            return simplify(wrap(cols[n.name]))
        if isinstance(n, RowIdRef) and rowid is not None:
            return simplify(wrap(rowid))
        if isinstance(n, VarTerm) and resolve_var is not None:
            if all(isinstance(a, Constant) for a in n.args):
                inst = VarInstance(n.lens, n.name, tuple(a.value for a in n.args))
                v = resolve_var(inst)
                if v is not None:
                    return Constant(v)
        return _node(n)

    return transform(e, step)


# ---------------------------------------------------------------------------
# Concrete evaluation
# ---------------------------------------------------------------------------

def eval_concrete(e, row, resolver=None):
    """Full evaluation with SQL null semantics.

    row      -- attribute map; RowIdRef reads row[ROWID_KEY]
    resolver -- VarInstance -> value; must be total on reachable instances
    """
    if isinstance(e, Constant):
        return e.value
    if isinstance(e, ColumnRef):
        if e.name not in row:
            raise ExprError(f"unbound column {e.name!r}")
        return row[e.name]
    if isinstance(e, RowIdRef):
        if ROWID_KEY not in row:
            raise ExprError("unbound ROWID")
        return row[ROWID_KEY]
    if isinstance(e, Arith):
        return V.arith(e.op, eval_concrete(e.lhs, row, resolver),
                       eval_concrete(e.rhs, row, resolver))
    if isinstance(e, Conditional):
        c = eval_concrete(e.cond, row, resolver)
        return eval_concrete(e.then if c is True else e.otherwise, row, resolver)
    if isinstance(e, VarTerm):
        args = tuple(eval_concrete(a, row, resolver) for a in e.args)
        inst = VarInstance(e.lens, e.name, args)
        if resolver is None:
            raise ExprError(f"no resolver for {inst}")
        return resolver(inst)
    if isinstance(e, Concat):
        out = []
        for p in e.parts:
            t = V.to_text(eval_concrete(p, row, resolver))
            if t is None:
                return None
            out.append(t)
        return "".join(out)
    if isinstance(e, CastText):
        return V.to_text(eval_concrete(e.child, row, resolver))
    if isinstance(e, BoolValue):
        return V.bool_to_int(eval_concrete(e.expr, row, resolver))
    if isinstance(e, BestGuessLookup):
        raise ExprError("best-guess lookups are backend-only expressions")
    if isinstance(e, Comparison):
        return V.compare(e.op, eval_concrete(e.lhs, row, resolver),
                         eval_concrete(e.rhs, row, resolver))
    if isinstance(e, And):
        return V.and3(eval_concrete(e.lhs, row, resolver),
                      eval_concrete(e.rhs, row, resolver))
    if isinstance(e, Or):
        return V.or3(eval_concrete(e.lhs, row, resolver),
                     eval_concrete(e.rhs, row, resolver))
    if isinstance(e, Not):
        return V.not3(eval_concrete(e.child, row, resolver))
    if isinstance(e, IsNull):
        return eval_concrete(e.child, row, resolver) is None
    if isinstance(e, BoolConst):
        return e.value
    if isinstance(e, IsTrue):
        return eval_concrete(e.child, row, resolver) is True
    if isinstance(e, IsFalse):
        return eval_concrete(e.child, row, resolver) is False
    raise ExprError(f"cannot evaluate {type(e).__name__}")


# ---------------------------------------------------------------------------
# Determinism formula
# ---------------------------------------------------------------------------

def scrub_vars(e, replacement=None):
    """Replace every Var term; used where a guard already implies the Var
    subtree is dead, so any stand-in value preserves semantics."""

    def step(n):
        if isinstance(n, VarTerm):
            return Constant(None) if replacement is None else replacement(n)
        return n

    return transform(e, step)


def is_det(e, var_det=None):
    """Boolean formula (no Var terms) that holds exactly where e is
    deterministic.  ``var_det`` overrides the Var base case, e.g. to consult
    acknowledgment state stored in the backend."""

    def vd(n):
        if var_det is None:
            return FALSE
        return var_det(n)

    def guard_expr(cond):
        # The guard is conjoined with isDet(cond); on rows where that fails
        # the conjunct collapses, so scrubbing Vars is sound.
        return scrub_vars(cond, None if var_det is None else _accepted_value_scrub)

    def rec(n):
        if isinstance(n, (Constant, ColumnRef, RowIdRef, BoolConst)):
            return TRUE
        if isinstance(n, VarTerm):
            return vd(n)
        if isinstance(n, BestGuessLookup):
            return conjoin([rec(p) for p in n.params])
        if isinstance(n, (Arith, Comparison)):
            return And(rec(n.lhs), rec(n.rhs))
        if isinstance(n, (Concat,)):
            return conjoin([rec(p) for p in n.parts])
        if isinstance(n, (CastText, IsNull, Not, IsTrue, IsFalse)):
            return rec(n.child)
        if isinstance(n, BoolValue):
            return rec(n.expr)
        if isinstance(n, Conditional):
            c = guard_expr(n.cond)
            return And(rec(n.cond),
                       Or(And(IsTrue(c), rec(n.then)),
                          And(Not(IsTrue(c)), rec(n.otherwise))))
        if isinstance(n, Or):
            d1, d2 = rec(n.lhs), rec(n.rhs)
            g1, g2 = guard_expr(n.lhs), guard_expr(n.rhs)
            return Or(Or(And(IsTrue(g1), d1), And(IsTrue(g2), d2)),
                      And(d1, d2))
        if isinstance(n, And):
            d1, d2 = rec(n.lhs), rec(n.rhs)
            g1, g2 = guard_expr(n.lhs), guard_expr(n.rhs)
            return Or(Or(And(IsFalse(g1), d1), And(IsFalse(g2), d2)),
                      And(d1, d2))
        raise ExprError(f"is_det: unsupported node {type(n).__name__}")

    return simplify(rec(e))


def _accepted_value_scrub(term):
    """Var stand-in for backend determinism formulas: the best-guess value
    when the instance is acknowledged, else NULL (the subtree is dead)."""
    from .inline import best_guess_table_name  # local import avoids a cycle

    return BestGuessLookup(best_guess_table_name(term.lens, term.name),
                           term.args, "accepted_value")


# ---------------------------------------------------------------------------
# Binding propagation
# ---------------------------------------------------------------------------

def literal_assignments(psi):
    """Map each asserted atom of a literal conjunction to True/False."""
    out = {}
    for term in conjuncts(psi):
        neg = False
        while isinstance(term, Not):
            neg = not neg
            term = term.child
        if isinstance(term, BoolConst):
            continue
        out[term] = not neg
    return out


def apply_binding(phi, psi):
    """phi[psi]: replace atoms of phi entailed or refuted by the literal
    conjunction psi, collapse conditionals whose condition became constant,
    then simplify.  Equivalent to phi on all rows satisfying psi."""
    asg = literal_assignments(psi)
    if not asg:
        return simplify(phi)
    # IsTrue(c) asserted means c is strictly true; refuted only means c is
    # not true (false or unknown), which still decides conditionals on c.
    strict_true = {t.child for t, v in asg.items() if isinstance(t, IsTrue) and v}
    not_true = {t.child for t, v in asg.items() if isinstance(t, IsTrue) and not v}

    def step(n):
        if isinstance(n, BoolExpr) and n in asg:
            return BoolConst(asg[n])
        if isinstance(n, BoolExpr) and n in strict_true:
            return TRUE
        if isinstance(n, IsTrue):
            if n.child in asg:
                return BoolConst(asg[n.child])
            if n.child in not_true:
                return FALSE
        if isinstance(n, IsFalse) and n.child in asg:
            return BoolConst(not asg[n.child])
        if isinstance(n, Conditional) and n.cond in not_true:
            return n.otherwise
        return _node(n)

    return transform(phi, step)
