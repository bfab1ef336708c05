"""The four execution strategies.

CLASSIC   run Q on the backend, apply F per row in the shim.
PARTITION split by deterministic guards; each region runs classic-style,
          fully deterministic regions never leave the backend.
INLINE    compile the whole query, flags and all, into backend SQL.
HYBRID    partition, then inline the non-deterministic regions.

All four share one formula set (values, per-cell and per-row determinism),
so they agree bit-for-bit; they differ only in where evaluation happens.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from operator import itemgetter

from .algebra import Project, Select, output_columns
from .compile import compile_expr
from .expr import (ColumnRef, FALSE, TRUE, VarInstance, contains_var, is_det,
                   simplify)
from .inline import (PROV_COL, accepted_flag_formula, best_guess_table_name,
                     build_inline_plan, missing_rows_predicate)
from .normalize import NormalForm, prov_expr
from .partition import naive_partition, partition_query

CLASSIC = "classic"
PARTITION = "partition"
INLINE = "inline"
HYBRID = "hybrid"
STRATEGIES = (CLASSIC, PARTITION, INLINE, HYBRID)

_BATCH = 2048


class QueryTimeout(Exception):
    pass


# ---------------------------------------------------------------------------
# Acceptance snapshot (best-guess tables mirrored into memory for the shim)
# ---------------------------------------------------------------------------

class Acceptance:
    def __init__(self, data=None):
        self.data = data or {}  # table -> {params: (value, accepted, override)}

    @classmethod
    def load(cls, backend, tables):
        data = {}
        for t in tables:
            cols = backend.table_columns(t)
            if cols is None:
                continue
            arity = sum(1 for c in cols if c.startswith("param"))
            rows = {}
            sel = ", ".join([f'"param{i + 1}"' for i in range(arity)] +
                            ['"value"', '"accepted"', '"override"'])
            for r in backend.execute(f'SELECT {sel} FROM "{t}"'):
                rows[tuple(r[:arity])] = (r[arity], r[arity + 1], r[arity + 2])
            data[t] = rows
        return cls(data)

    def lookup(self, table, what, params):
        """Mirrors the scalar-subquery semantics: missing row -> NULL."""
        row = self.data.get(table, {}).get(tuple(params))
        if row is None:
            return None
        value, accepted, override = row
        if what == "value":
            return override if override is not None else value
        if what == "accepted":
            return accepted
        if what == "accepted_value":
            if accepted:
                return override if override is not None else value
            return None
        raise ValueError(f"unknown lookup kind {what!r}")


@dataclass
class ExecContext:
    backend: object
    models: dict                      # (lens, var) -> Model
    acceptance: Acceptance
    memo: dict = field(default_factory=dict)  # per-plan compiled artifacts

    def memoize(self, key, plan, build):
        """Cache ``build()`` under (key, plan identity); the plan object is
        pinned so its id stays valid."""
        k = (key, id(plan))
        hit = self.memo.get(k)
        if hit is None:
            hit = (plan, build())
            self.memo[k] = hit
        return hit[1]

    def var_resolver(self):
        def resolve(inst: VarInstance):
            table = best_guess_table_name(inst.lens, inst.name)
            v = self.acceptance.lookup(table, "value",
                                       tuple(str(a) for a in inst.args))
            if v is not None:
                return v
            m = self.models.get((inst.lens, inst.name))
            if m is None:
                raise KeyError(f"no model for {inst}")
            return m.get_best_guess(inst)
        return resolve

    def bg(self, table, what, params):
        return self.acceptance.lookup(table, what,
                                      tuple(str(p) for p in params))


# ---------------------------------------------------------------------------
# Result container
# ---------------------------------------------------------------------------

class ResultSet:
    """Row storage plus a layout describing where values, determinism flags
    and the provenance marker live inside each stored tuple."""

    def __init__(self, attrs, raw, val_idx, marker_idx, det_spec, rdet_spec,
                 missing, meta=None):
        self.attrs = tuple(attrs)
        self.raw = raw
        self.val_idx = tuple(val_idx)
        self.marker_idx = marker_idx
        self.det_spec = tuple(det_spec)   # per attr: bool const or tuple index
        self.rdet_spec = rdet_spec        # bool const or tuple index
        self.missing = missing
        self.meta = meta or {}
        self._vget = (itemgetter(*val_idx) if len(val_idx) > 1 else
                      (lambda r, i=val_idx[0]: (r[i],)) if val_idx else
                      (lambda r: ()))

    def __len__(self):
        return len(self.raw)

    def values(self, i):
        v = self._vget(self.raw[i])
        return v if isinstance(v, tuple) else (v,)

    def marker(self, i):
        return self.raw[i][self.marker_idx]

    def col_det(self, i):
        r = self.raw[i]
        return tuple(s if isinstance(s, bool) else r[s] == 1
                     for s in self.det_spec)

    def row_det(self, i):
        s = self.rdet_spec
        return s if isinstance(s, bool) else self.raw[i][s] == 1


def _standardize(rs: ResultSet):
    """Rewrite into the canonical layout: values, det flags, rdet, marker."""
    n = len(rs.attrs)
    raw = []
    for i in range(len(rs)):
        raw.append(rs.values(i) + rs.col_det(i) + (rs.row_det(i), rs.marker(i)))
    return ResultSet(rs.attrs, raw, range(n), 2 * n + 1,
                     range(n, 2 * n), 2 * n, rs.missing, rs.meta)


def merge_results(parts, missing):
    if len(parts) == 1:
        out = parts[0]
        out.missing = missing
        return out
    std = [_standardize(p) for p in parts]
    base = std[0]
    raw = []
    for p in std:
        raw.extend(p.raw)
    meta = {"segments": [p.meta for p in std]}
    return ResultSet(base.attrs, raw, base.val_idx, base.marker_idx,
                     base.det_spec, base.rdet_spec, missing, meta)


# ---------------------------------------------------------------------------
# Classic
# ---------------------------------------------------------------------------

def _identity_query(nf):
    cols = output_columns(nf.det_query)
    targets = tuple((c, ColumnRef(c)) for c in cols)
    return Project(targets + ((PROV_COL, prov_expr(nf.det_query)),),
                   nf.det_query), cols


def _prepare_classic(nf):
    """Formulas, compiled closures, and backend SQL for the classic loop."""
    from .frontend import render_sql
    det_exprs = [simplify(is_det(e, accepted_flag_formula))
                 for _, e in nf.targets]
    rdet_expr = simplify(is_det(nf.condition, accepted_flag_formula))
    cond = nf.condition

    fully_det = (cond == TRUE and rdet_expr == TRUE
                 and all(d == TRUE for d in det_exprs)
                 and not any(contains_var(e) for _, e in nf.targets))
    if fully_det:
        q = Project(tuple(nf.targets) + ((PROV_COL, prov_expr(nf.det_query)),),
                    nf.det_query)
        return {"fully_det": True, "sql": render_sql(q)}

    q, cols = _identity_query(nf)
    colmap = {c: i for i, c in enumerate(cols)}
    val_fs = []
    for _, e in nf.targets:
        if isinstance(e, ColumnRef):
            val_fs.append(lambda r, _v=None, _b=None, i=colmap[e.name]: r[i])
        else:
            val_fs.append(compile_expr(e, colmap))
    det_fs = [d if isinstance(d, bool) else compile_expr(d, colmap)
              for d in (_const3(x) for x in det_exprs)]
    cond_f = None if cond == TRUE else compile_expr(cond, colmap)
    rdet_c = _const3(rdet_expr)
    rdet_f = rdet_c if isinstance(rdet_c, bool) else compile_expr(rdet_c, colmap)
    return {"fully_det": False, "sql": render_sql(q), "marker_idx": len(cols),
            "val_fs": val_fs, "det_fs": det_fs, "cond_f": cond_f,
            "rdet_f": rdet_f}


def run_classic(nf: NormalForm, ctx: ExecContext, cap=None):
    t0 = time.monotonic()
    attrs = [a for a, _ in nf.targets]
    prep = ctx.memoize("classic", nf, lambda: _prepare_classic(nf))

    if prep["fully_det"]:
        # Whole query is backend-safe: let the database compute the values
        # and the marker; no per-row work in the shim at all.
        raw = _fetch_all(ctx.backend, prep["sql"], cap, t0)
        return ResultSet(attrs, raw, range(len(attrs)), len(attrs),
                         [True] * len(attrs), True, 0,
                         {"millis": _ms(t0), "backend_rows": len(raw)})

    midx = prep["marker_idx"]
    v = ctx.var_resolver()
    bg = ctx.bg
    val_fs, det_fs = prep["val_fs"], prep["det_fs"]
    cond_f, rdet_f = prep["cond_f"], prep["rdet_f"]

    out, missing = [], 0
    cur = ctx.backend.execute(prep["sql"])
    scanned = 0
    while True:
        batch = cur.fetchmany(_BATCH)
        if not batch:
            break
        scanned += len(batch)
        if cap is not None and time.monotonic() - t0 > cap:
            raise QueryTimeout(f"classic run exceeded {cap}s")
        for r in batch:
            keep = True if cond_f is None else cond_f(r, v, bg) is True
            if not keep:
                if not (rdet_f if isinstance(rdet_f, bool)
                        else rdet_f(r, v, bg) is True):
                    missing += 1
                continue
            vals = tuple(f(r, v, bg) for f in val_fs)
            dets = tuple(d if isinstance(d, bool) else d(r, v, bg) is True
                         for d in det_fs)
            rd = rdet_f if isinstance(rdet_f, bool) else rdet_f(r, v, bg) is True
            out.append(vals + dets + (rd, r[midx]))
    n = len(attrs)
    return ResultSet(attrs, out, range(n), 2 * n + 1, range(n, 2 * n), 2 * n,
                     missing, {"millis": _ms(t0), "backend_rows": scanned})


def _const3(d):
    if d == TRUE:
        return True
    if d == FALSE:
        return False
    return d


def _ms(t0):
    return (time.monotonic() - t0) * 1000.0


def _fetch_all(backend, sql, cap, t0):
    cur = backend.execute(sql)
    out = []
    while True:
        batch = cur.fetchmany(_BATCH)
        if not batch:
            break
        out.extend(batch)
        if cap is not None and time.monotonic() - t0 > cap:
            raise QueryTimeout(f"fetch exceeded {cap}s")
    return out


# ---------------------------------------------------------------------------
# Inline
# ---------------------------------------------------------------------------

def _prepare_inline(nf):
    from .frontend import render_sql
    plan = build_inline_plan(nf)
    names = [a for a, _ in plan.query.targets]
    pos = {a: i for i, a in enumerate(names)}
    val_idx = [pos[a] for a in plan.attrs]
    det_spec = [d if isinstance(d, bool) else pos[d]
                for d in (plan.det_columns[a] for a in plan.attrs)]
    rdet = plan.row_det_column
    rdet_spec = rdet if isinstance(rdet, bool) else pos[rdet]
    pred = missing_rows_predicate(nf)
    missing_sql = None
    if pred != FALSE:
        missing_sql = ("SELECT COUNT(*) FROM "
                       f"({render_sql(Select(pred, nf.det_query))})")
    return {"attrs": plan.attrs, "sql": render_sql(plan.query),
            "val_idx": val_idx, "marker_idx": pos[plan.provenance_column],
            "det_spec": det_spec, "rdet_spec": rdet_spec,
            "missing_sql": missing_sql}


def run_inline(nf: NormalForm, ctx: ExecContext, cap=None, count_missing=True):
    t0 = time.monotonic()
    prep = ctx.memoize("inline", nf, lambda: _prepare_inline(nf))
    raw = _fetch_all(ctx.backend, prep["sql"], cap, t0)
    missing = 0
    if count_missing and prep["missing_sql"] is not None:
        missing = ctx.backend.execute(prep["missing_sql"]).fetchone()[0]
    return ResultSet(prep["attrs"], raw, prep["val_idx"], prep["marker_idx"],
                     prep["det_spec"], prep["rdet_spec"], missing,
                     {"millis": _ms(t0), "backend_rows": len(raw)})


# ---------------------------------------------------------------------------
# Partition / Hybrid
# ---------------------------------------------------------------------------

def _prepare_partition(nf):
    ps = naive_partition(nf.condition)
    return ps, partition_query(nf, ps)


def run_partition(nf: NormalForm, ctx: ExecContext, cap=None, inline_nondet=False):
    ps, subs = ctx.memoize("partition", nf, lambda: _prepare_partition(nf))
    segments, missing, timings = [], 0, []
    for p, sub in zip(ps, subs):
        t0 = time.monotonic()
        if inline_nondet and not p.deterministic:
            seg = run_inline(sub, ctx, cap)
        else:
            seg = run_classic(sub, ctx, cap)
        missing += seg.missing
        timings.append({"deterministic": p.deterministic,
                        "millis": _ms(t0), "rows": len(seg)})
        segments.append(seg)
    rs = merge_results(segments, missing)
    rs.meta["partitions"] = timings
    return rs


def run_hybrid(nf, ctx, cap=None):
    return run_partition(nf, ctx, cap, inline_nondet=True)


def run_strategy(strategy, nf, ctx, cap=None):
    if strategy == CLASSIC:
        return run_classic(nf, ctx, cap)
    if strategy == PARTITION:
        return run_partition(nf, ctx, cap)
    if strategy == INLINE:
        return run_inline(nf, ctx, cap)
    if strategy == HYBRID:
        return run_hybrid(nf, ctx, cap)
    raise ValueError(f"unknown strategy {strategy!r}")
