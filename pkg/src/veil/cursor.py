"""Uncertainty-annotated cursors and Monte-Carlo explanations.

Every result row carries a provenance marker; explaining a cell or a row
reconstructs the single backend source row behind the marker, re-evaluates
the shim expressions symbolically, and samples the remaining Var terms over
seeded possible worlds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .algebra import Project, output_columns
from .expr import (ColumnRef, VarInstance, contains_var, eval_concrete,
                   eval_lazy, var_terms)
from .inline import MarkerError, best_guess_table_name, unwrap
from .lenses import sample_world

DEFAULT_SAMPLES = 1000
DEFAULT_SEED = 42
MAX_EXAMPLES = 5
MAX_REASONS = 5


@dataclass
class Explanation:
    kind: str                      # "cell" or "row"
    deterministic: bool
    reasons: list = field(default_factory=list)
    confidence: float = 1.0
    variance: float = 0.0
    ci_low: object = None          # 5th percentile of sampled values
    ci_high: object = None         # 95th percentile
    bound_low: object = None       # hard bounds from model support, if known
    bound_high: object = None
    histogram: dict = field(default_factory=dict)
    examples: list = field(default_factory=list)
    n_samples: int = 0


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _percentile(sorted_vals, q):
    if not sorted_vals:
        return None
    i = min(len(sorted_vals) - 1, max(0, int(math.ceil(q * len(sorted_vals))) - 1))
    return sorted_vals[i]


def _spread(samples):
    """Variance for numeric samples, Shannon entropy otherwise."""
    if not samples:
        return 0.0
    if all(_is_num(v) for v in samples):
        n = len(samples)
        mean = sum(samples) / n
        return sum((v - mean) ** 2 for v in samples) / n
    counts = {}
    for v in samples:
        counts[v] = counts.get(v, 0) + 1
    n = len(samples)
    return -sum((c / n) * math.log(c / n) for c in counts.values())


def _instances(exprs):
    """Distinct VarInstances in residual expressions (args already folded)."""
    seen, out = set(), []
    for e in exprs:
        for t in var_terms(e):
            args = tuple(a.value for a in t.args)
            inst = VarInstance(t.lens, t.name, args)
            if inst not in seen:
                seen.add(inst)
                out.append(inst)
    return out


def _interval(e, models):
    """Monotone interval bounds for a residual numeric expression."""
    from . import expr as E
    if isinstance(e, E.Constant):
        return (e.value, e.value) if _is_num(e.value) else None
    if isinstance(e, E.VarTerm):
        m = models.get((e.lens, e.name))
        if m is None:
            return None
        args = tuple(a.value for a in e.args if isinstance(a, E.Constant))
        return m.bounds(VarInstance(e.lens, e.name, args))
    if isinstance(e, E.Conditional):
        lo = _interval(e.then, models)
        hi = _interval(e.otherwise, models)
        if lo is None or hi is None:
            return None
        return (min(lo[0], hi[0]), max(lo[1], hi[1]))
    if isinstance(e, E.Arith) and e.op in ("+", "-", "*"):
        a = _interval(e.lhs, models)
        b = _interval(e.rhs, models)
        if a is None or b is None:
            return None
        if e.op == "+":
            return (a[0] + b[0], a[1] + b[1])
        if e.op == "-":
            return (a[0] - b[1], a[1] - b[0])
        corners = [x * y for x in a for y in b]
        return (min(corners), max(corners))
    return None


class Explainer:
    """Explanation engine bound to one executed query."""

    def __init__(self, nf, backend, models, acceptance,
                 n_samples=DEFAULT_SAMPLES, base_seed=DEFAULT_SEED):
        self.nf = nf
        self.backend = backend
        self.models = models
        self.acceptance = acceptance
        self.n_samples = n_samples
        self.base_seed = base_seed

    # -- source row reconstruction -------------------------------------

    def source_row(self, marker):
        from .frontend import render_sql
        q = unwrap(self.nf.det_query, marker)
        cols = output_columns(self.nf.det_query)
        proj = Project(tuple((c, ColumnRef(c)) for c in cols), q)
        rows = self.backend.execute(render_sql(proj)).fetchall()
        if len(rows) != 1:
            raise MarkerError(
                f"marker {marker!r} resolved to {len(rows)} rows, expected 1")
        return dict(zip(cols, rows[0]))

    def _accepted(self, inst):
        table = best_guess_table_name(inst.lens, inst.name)
        return self.acceptance.lookup(
            table, "accepted_value", tuple(str(a) for a in inst.args))

    def residual(self, e, srow):
        """Shim expression with the source row and acknowledged Vars folded
        in; any Var terms left are genuinely uncertain."""
        return eval_lazy(e, cols=srow, resolve_var=self._accepted)

    # -- sampling --------------------------------------------------------

    def _sample_values(self, e, cond, n, seed, pin=None):
        """Sampled values of e across worlds where cond holds locally."""
        out = []
        base = sample_world
        for k in range(n):
            resolver = base(self.models, seed + k)
            if pin is not None:
                inst0, val0 = pin
                inner = resolver

                def resolver(i, _inner=inner, _i0=inst0, _v0=val0):
                    return _v0 if i == _i0 else _inner(i)
            if cond is not None and contains_var(cond):
                if eval_concrete(cond, {}, resolver) is not True:
                    continue
            out.append(eval_concrete(e, {}, resolver))
        return out

    def _sample_cond(self, cond, n, seed, pin=None):
        hits = 0
        for k in range(n):
            resolver = sample_world(self.models, seed + k)
            if pin is not None:
                inst0, val0 = pin
                inner = resolver

                def resolver(i, _inner=inner, _i0=inst0, _v0=val0):
                    return _v0 if i == _i0 else _inner(i)
            if eval_concrete(cond, {}, resolver) is True:
                hits += 1
        return hits / n if n else 0.0

    # -- reasons -----------------------------------------------------------

    def _rank_reasons(self, insts, base_spread, spread_when_pinned):
        scored = []
        for inst in insts:
            m = self.models.get((inst.lens, inst.name))
            if m is None:
                continue
            drop = base_spread - spread_when_pinned(inst, m.get_best_guess(inst))
            scored.append((drop, m.get_reason(inst)))
        scored.sort(key=lambda t: -t[0])
        return [r for _, r in scored[:MAX_REASONS]]

    # -- public API ----------------------------------------------------------

    def explain_cell(self, marker, attr, n_samples=None, base_seed=None):
        n = n_samples or self.n_samples
        seed = self.base_seed if base_seed is None else base_seed
        tmap = dict(self.nf.targets)
        if attr not in tmap:
            raise KeyError(f"unknown column {attr!r}")
        srow = self.source_row(marker)
        e = self.residual(tmap[attr], srow)
        cond = self.residual(self.nf.condition, srow)
        if not contains_var(e):
            v = eval_concrete(e, {})
            return Explanation("cell", True, histogram={v: 1.0}, examples=[v])

        samples = self._sample_values(e, cond, n, seed)
        if not samples:  # condition rejected every world; sample e alone
            samples = self._sample_values(e, None, n, seed)
        hist = {}
        for v in samples:
            hist[v] = hist.get(v, 0) + 1
        total = len(samples)
        hist = {v: c / total for v, c in hist.items()}
        best = max(hist.items(), key=lambda vc: vc[1])[0]
        numeric = sorted(v for v in samples if _is_num(v))
        base_spread = _spread(samples)
        insts = _instances([e, cond])
        reasons = self._rank_reasons(
            insts, base_spread,
            lambda i, g: _spread(self._sample_values(e, cond, n, seed, (i, g))))
        bounds = _interval(e, self.models)
        seen, examples = set(), []
        for v in samples:
            if v not in seen:
                seen.add(v)
                examples.append(v)
            if len(examples) >= MAX_EXAMPLES:
                break
        return Explanation(
            "cell", False, reasons=reasons, confidence=hist[best],
            variance=base_spread if numeric else 0.0,
            ci_low=_percentile(numeric, 0.05), ci_high=_percentile(numeric, 0.95),
            bound_low=bounds[0] if bounds else None,
            bound_high=bounds[1] if bounds else None,
            histogram=hist, examples=examples, n_samples=total)

    def explain_row(self, marker, n_samples=None, base_seed=None):
        n = n_samples or self.n_samples
        seed = self.base_seed if base_seed is None else base_seed
        srow = self.source_row(marker)
        cond = self.residual(self.nf.condition, srow)
        if not contains_var(cond):
            truth = eval_concrete(cond, {}) is True
            return Explanation("row", True, confidence=1.0 if truth else 0.0,
                               histogram={truth: 1.0})
        p = self._sample_cond(cond, n, seed)

        def bool_spread(q):
            k = round(q * n)
            return _spread([True] * k + [False] * (n - k))

        insts = _instances([cond])
        reasons = self._rank_reasons(
            insts, bool_spread(p),
            lambda i, g: bool_spread(self._sample_cond(cond, n, seed, (i, g))))
        return Explanation("row", False, reasons=reasons, confidence=p,
                           variance=p * (1 - p),
                           histogram={True: p, False: 1 - p}, n_samples=n)


# ---------------------------------------------------------------------------
# Cursor
# ---------------------------------------------------------------------------

@dataclass
class AnnotatedRow:
    attrs: tuple
    values: tuple
    col_det: tuple
    row_det: bool
    marker: str

    def __getitem__(self, attr):
        return self.values[self.attrs.index(attr)]

    def as_dict(self):
        return dict(zip(self.attrs, self.values))


class AnnotatedCursor:
    """Iterates a result set; answers per-cell/per-row determinism and
    produces explanations for the current row."""

    def __init__(self, resultset, explainer):
        self._rs = resultset
        self._explainer = explainer
        self._i = -1

    @property
    def attrs(self):
        return self._rs.attrs

    @property
    def meta(self):
        return self._rs.meta

    def __len__(self):
        return len(self._rs)

    def __iter__(self):
        while True:
            row = self.fetchone()
            if row is None:
                return
            yield row

    def fetchone(self):
        if self._i + 1 >= len(self._rs):
            return None
        self._i += 1
        return self.row(self._i)

    def row(self, i):
        rs = self._rs
        return AnnotatedRow(rs.attrs, rs.values(i), rs.col_det(i),
                            rs.row_det(i), rs.marker(i))

    def fetchall(self):
        return [r for r in self]

    def is_column_deterministic(self, attr, i=None):
        i = self._i if i is None else i
        return self._rs.col_det(i)[self._rs.attrs.index(attr)]

    def is_row_deterministic(self, i=None):
        return self._rs.row_det(self._i if i is None else i)

    def non_deterministic_rows_missing(self):
        """Upper bound on rows absent from this result only because their
        condition is uncertain; final once the strategy has run."""
        return self._rs.missing

    def explain_cell(self, attr, i=None, n_samples=None, base_seed=None):
        i = self._i if i is None else i
        return self._explainer.explain_cell(self._rs.marker(i), attr,
                                            n_samples, base_seed)

    def explain_row(self, i=None, n_samples=None, base_seed=None):
        i = self._i if i is None else i
        return self._explainer.explain_row(self._rs.marker(i),
                                           n_samples, base_seed)
