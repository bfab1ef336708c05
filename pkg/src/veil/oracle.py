"""Reference evaluator: enumerate every possible world and run the operator
tree row-by-row in Python.

Deliberately shares nothing with the strategy pipeline except the scalar
value semantics: its own expression walker, its own provenance markers, and
explicit world enumeration instead of formula rewriting.  Used as ground
truth in tests.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from . import values as V
from . import expr as E
from .algebra import Cross, Project, Select, Table, Union, Unit, rid_col, scoped

DEFAULT_WORLD_LIMIT = 4096


class OracleOverflow(Exception):
    """Joint world count exceeded the enumeration limit."""


def _ev(e, row, marker, resolve):
    if isinstance(e, E.Constant):
        return e.value
    if isinstance(e, E.BoolConst):
        return e.value
    if isinstance(e, E.ColumnRef):
        return row[e.name]
    if isinstance(e, E.RowIdRef):
        return marker
    if isinstance(e, E.Arith):
        return V.arith(e.op, _ev(e.lhs, row, marker, resolve),
                       _ev(e.rhs, row, marker, resolve))
    if isinstance(e, E.Conditional):
        c = _ev(e.cond, row, marker, resolve)
        return (_ev(e.then, row, marker, resolve) if c is True
                else _ev(e.otherwise, row, marker, resolve))
    if isinstance(e, E.VarTerm):
        args = tuple(_ev(a, row, marker, resolve) for a in e.args)
        return resolve(E.VarInstance(e.lens, e.name, args))
    if isinstance(e, E.Concat):
        parts = [V.to_text(_ev(p, row, marker, resolve)) for p in e.parts]
        return None if any(p is None for p in parts) else "".join(parts)
    if isinstance(e, E.CastText):
        return V.to_text(_ev(e.child, row, marker, resolve))
    if isinstance(e, E.BoolValue):
        return V.bool_to_int(_ev(e.expr, row, marker, resolve))
    if isinstance(e, E.Comparison):
        return V.compare(e.op, _ev(e.lhs, row, marker, resolve),
                         _ev(e.rhs, row, marker, resolve))
    if isinstance(e, E.And):
        return V.and3(_ev(e.lhs, row, marker, resolve),
                      _ev(e.rhs, row, marker, resolve))
    if isinstance(e, E.Or):
        return V.or3(_ev(e.lhs, row, marker, resolve),
                     _ev(e.rhs, row, marker, resolve))
    if isinstance(e, E.Not):
        return V.not3(_ev(e.child, row, marker, resolve))
    if isinstance(e, E.IsNull):
        return _ev(e.child, row, marker, resolve) is None
    if isinstance(e, E.IsTrue):
        return _ev(e.child, row, marker, resolve) is True
    if isinstance(e, E.IsFalse):
        return _ev(e.child, row, marker, resolve) is False
    raise TypeError(f"oracle cannot evaluate {type(e).__name__}")


def _rows_of(q, backend, resolve):
    """Yield (attr_map, marker) pairs for a tree in one world."""
    if isinstance(q, Table):
        out = []
        for r in backend.execute(f'SELECT rowid, * FROM "{q.name}"'):
            row = {scoped(c, q.alias): r[i + 1] for i, c in enumerate(q.cols)}
            row[rid_col(q.alias)] = r[0]
            out.append((row, str(r[0])))
        return out
    if isinstance(q, Unit):
        return [({}, "0")]
    if isinstance(q, Project):
        out = []
        for row, m in _rows_of(q.src, backend, resolve):
            out.append(({a: _ev(e, row, m, resolve) for a, e in q.targets}, m))
        return out
    if isinstance(q, Select):
        return [(row, m) for row, m in _rows_of(q.src, backend, resolve)
                if _ev(q.pred, row, m, resolve) is True]
    if isinstance(q, Cross):
        out = []
        for lrow, lm in _rows_of(q.lhs, backend, resolve):
            for rrow, rm in _rows_of(q.rhs, backend, resolve):
                row = dict(lrow)
                for k, v in rrow.items():
                    # duplicate attributes from the right get prefixed
                    row[f"r2.{k}" if k in row else k] = v
                out.append((row, f"({lm})({rm})"))
        return out
    if isinstance(q, Union):
        out = [(row, f"{m}+1") for row, m in _rows_of(q.lhs, backend, resolve)]
        out += [(row, f"{m}+2") for row, m in _rows_of(q.rhs, backend, resolve)]
        return out
    raise TypeError(f"oracle cannot execute {type(q).__name__}")


def _attrs_of(q):
    if isinstance(q, Project):
        return [a for a, _ in q.targets]
    if isinstance(q, Select):
        return _attrs_of(q.src)
    if isinstance(q, Union):
        return _attrs_of(q.lhs)
    raise TypeError("oracle needs a projection at the root")


@dataclass
class WorldResult:
    prob: float
    assignment: dict               # VarInstance -> value
    rows: list                     # of (values tuple, marker)


@dataclass
class OracleResult:
    attrs: list
    worlds: list = field(default_factory=list)
    best_guess_rows: list = field(default_factory=list)   # (values, marker)
    marker_confidence: dict = field(default_factory=dict)  # marker -> prob
    cell_dist: dict = field(default_factory=dict)  # (marker, attr) -> {v: p}

    def missing_markers(self):
        """Markers present in some world but not in the best-guess result."""
        present = {m for _, m in self.best_guess_rows}
        return sorted(m for m in self.marker_confidence if m not in present)


def enumerate_worlds_oracle(q, backend, models, pinned=None,
                            limit=DEFAULT_WORLD_LIMIT):
    """Exhaustive possible-worlds evaluation of an expanded operator tree.

    ``pinned`` maps acknowledged VarInstances to their fixed value; they are
    excluded from enumeration.  Raises OracleOverflow past ``limit`` worlds.
    """
    pinned = pinned or {}
    insts, choices = [], []
    count = 1
    for key in sorted(models, key=repr):
        model = models[key]
        for inst in model.instances():
            if inst in pinned:
                continue
            support = model.distribution(inst).support
            insts.append(inst)
            choices.append(support)
            count *= len(support)
            if count > limit:
                raise OracleOverflow(f"more than {limit} worlds")

    attrs = _attrs_of(q)
    res = OracleResult(attrs=attrs)

    def run(assignment):
        full = dict(pinned)
        full.update(assignment)

        def resolve(inst):
            if inst not in full:
                raise KeyError(f"oracle world is missing {inst}")
            return full[inst]

        return [(tuple(row[a] for a in attrs), m)
                for row, m in _rows_of(q, backend, resolve)]

    weight = {}  # (marker, attr, value) -> prob mass
    for combo in itertools.product(*choices) if choices else [()]:
        assignment = {}
        prob = 1.0
        for inst, (value, p) in zip(insts, combo):
            assignment[inst] = value
            prob *= p
        rows = run(assignment)
        res.worlds.append(WorldResult(prob, assignment, rows))
        for vals, m in rows:
            res.marker_confidence[m] = res.marker_confidence.get(m, 0.0) + prob
            for a, v in zip(attrs, vals):
                weight[(m, a, v)] = weight.get((m, a, v), 0.0) + prob

    # Conditional value distribution per surviving cell
    for (m, a, v), p in weight.items():
        total = res.marker_confidence[m]
        res.cell_dist.setdefault((m, a), {})[v] = p / total

    bg = {}
    for inst, support in zip(insts, choices):
        key = (inst.lens, inst.name)
        bg[inst] = models[key].get_best_guess(inst)
    res.best_guess_rows = run(bg)
    return res
