"""High-level shim facade: open a database, define lenses, run queries under
any strategy, explain results, and acknowledge repairs."""
from __future__ import annotations

import hashlib
import json

from .backend import Backend, BackendError, Catalog
from .frontend import CreateLensStatement, ParseError, parse
from .inline import best_guess_table_name, materialize_best_guesses
from .cursor import AnnotatedCursor, DEFAULT_SAMPLES, DEFAULT_SEED, Explainer
from .lenses import (DOMAIN_REPAIR, SCHEMA_MATCHING, LensDefinition, LensError,
                     build_domain_repair_body, build_schema_matching_body,
                     train_domain_repair, train_schema_matching)
from .normalize import expand_lenses, normalize
from .strategies import (Acceptance, ExecContext, INLINE, STRATEGIES,
                         run_classic, run_strategy)

FIX = "FIX"
APPROVE = "APPROVE"


class ServiceError(Exception):
    pass


class VeilDB:
    """One open database plus its lens catalog."""

    def __init__(self, path=":memory:", n_samples=DEFAULT_SAMPLES,
                 base_seed=DEFAULT_SEED):
        self.backend = Backend(path)
        self.catalog = Catalog(self.backend)
        self.n_samples = n_samples
        self.base_seed = base_seed
        self._plan_cache = {}
        self._ctx_cache = None

    def close(self):
        self.backend.close()

    # -- model / acceptance plumbing ------------------------------------

    def models(self):
        out = {}
        for name in self.catalog.lens_names():
            d = self.catalog.lens(name)
            for var, model in d.models.items():
                out[(d.name, var)] = model
        return out

    def _context(self, models=None):
        if models is None:
            if self._ctx_cache is None:
                self._ctx_cache = self._context(self.models())
            return self._ctx_cache
        tables = [best_guess_table_name(lens, var) for lens, var in models]
        acceptance = Acceptance.load(self.backend, tables)
        return ExecContext(self.backend, models, acceptance)

    # -- queries -------------------------------------------------------------

    def execute(self, sql, strategy=INLINE, cap=None,
                n_samples=None, base_seed=None):
        strategy = strategy.casefold()
        if strategy not in STRATEGIES:
            raise ServiceError(f"unknown strategy {strategy!r}; "
                               f"choose one of {', '.join(STRATEGIES)}")
        nf = self._plan_cache.get(sql)
        if nf is None:
            stmt = parse(sql, self.catalog)
            if isinstance(stmt, CreateLensStatement):
                raise ServiceError("use create_lens() for lens definitions")
            expanded = expand_lenses(stmt, self.catalog)
            nf = normalize(expanded)
            self._plan_cache[sql] = nf
        ctx = self._context()
        rs = run_strategy(strategy, nf, ctx, cap)
        explainer = Explainer(
            nf, self.backend, ctx.models, ctx.acceptance,
            n_samples or self.n_samples,
            self.base_seed if base_seed is None else base_seed)
        return AnnotatedCursor(rs, explainer)

    def run(self, sql, strategy=INLINE, cap=None):
        """Dispatch a statement: lens DDL or a query."""
        stmt = parse(sql, self.catalog)
        if isinstance(stmt, CreateLensStatement):
            return self.create_lens_stmt(stmt)
        return self.execute(sql, strategy, cap)

    # -- lens creation ----------------------------------------------------

    def create_lens(self, ddl):
        stmt = parse(ddl, self.catalog)
        if not isinstance(stmt, CreateLensStatement):
            raise ParseError("expected a CREATE LENS statement", 0)
        return self.create_lens_stmt(stmt)

    def create_lens_stmt(self, stmt: CreateLensStatement):
        source = stmt.inner_select
        rows, attrs = self._train_rows(source)
        if stmt.lens_kind == DOMAIN_REPAIR:
            repair = [p[0] for p in stmt.param_list if "NOT NULL" in p[2]]
            if not repair:
                repair = [p[0] for p in stmt.param_list]
            unknown = [c for c in repair if c not in attrs]
            if unknown:
                raise LensError(f"lens repairs unknown columns {unknown}")
            models = {}
            for col in repair:
                models[col] = train_domain_repair(col, rows, lens=stmt.name)
            body = build_domain_repair_body(stmt.name, source, attrs, repair)
        elif stmt.lens_kind == SCHEMA_MATCHING:
            target_schema = [(p[0], p[1] or "text") for p in stmt.param_list]
            source_schema = self._source_schema(attrs, rows)
            models = train_schema_matching(source_schema, target_schema,
                                           lens=stmt.name)
            body = build_schema_matching_body(stmt.name, source, models,
                                              target_schema)
        else:
            raise LensError(f"unsupported lens kind {stmt.lens_kind!r}")

        model_id = hashlib.sha256(json.dumps(
            {v: m.to_json() for v, m in models.items()},
            sort_keys=True, default=str).encode()).hexdigest()[:16]
        d = LensDefinition(name=stmt.name, kind=stmt.lens_kind,
                           source_query=source, params=stmt.param_list,
                           body=body, models=models, model_id=model_id)
        self.catalog.register(d)
        # cached plans may now resolve differently; acceptance tables grew
        self._plan_cache.clear()
        self._ctx_cache = None
        materialize_best_guesses(d, self.backend)
        return d

    def _train_rows(self, source_tree):
        """Best-guess rows of the lens source, keyed by provenance marker."""
        nf = normalize(expand_lenses(source_tree, self.catalog))
        models = self.models()
        rs = run_classic(nf, self._context(models))
        attrs = list(rs.attrs)
        rows = []
        for i in range(len(rs)):
            row = dict(zip(attrs, rs.values(i)))
            row["__rowid__"] = rs.marker(i)
            rows.append(row)
        return rows, attrs

    @staticmethod
    def _source_schema(attrs, rows):
        schema = []
        for a in attrs:
            vals = [r[a] for r in rows if r[a] is not None]
            numeric = bool(vals) and all(
                isinstance(v, (int, float)) and not isinstance(v, bool)
                for v in vals)
            schema.append((a, "numeric" if numeric else "text"))
        return schema

    def lenses(self):
        out = []
        for name in self.catalog.lens_names():
            d = self.catalog.lens(name)
            out.append({
                "name": d.name, "kind": d.kind, "model_id": d.model_id,
                "columns": [a for a, _ in d.body.targets],
                "variables": sorted(d.models),
            })
        return out

    # -- acknowledgment --------------------------------------------------

    def acknowledge(self, lens, var, args, action, value=None):
        """FIX pins an instance to ``value``; APPROVE accepts the current
        best guess.  Both mark the instance deterministic from now on."""
        d = self.catalog.lens(lens)
        if d is None or var not in d.models:
            raise ServiceError(f"unknown lens variable {lens}.{var}")
        table = best_guess_table_name(d.name, var)
        key = tuple(str(a) for a in args)
        params = [f"param{i + 1}" for i in range(len(key))]
        where = " AND ".join(f'"{p}" = ?' for p in params) or "1"
        hit = self.backend.execute(
            f'SELECT COUNT(*) FROM "{table}" WHERE {where}', key).fetchone()[0]
        if not hit:
            raise ServiceError(
                f"no instance of {lens}.{var} with arguments {list(args)}")
        if action == FIX:
            self.backend.execute(
                f'UPDATE "{table}" SET accepted = 1, override = ? WHERE {where}',
                (value,) + key)
        elif action == APPROVE:
            self.backend.execute(
                f'UPDATE "{table}" SET accepted = 1 WHERE {where}', key)
        else:
            raise ServiceError(f"unknown action {action!r}; use FIX or APPROVE")
        self._ctx_cache = None  # acceptance snapshot changed

    def environment_hash(self):
        return self.backend.hash_non_reserved_tables()
