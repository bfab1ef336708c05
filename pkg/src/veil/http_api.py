"""HTTP facade over VeilDB for analyst tooling.

Endpoints:
  POST /query        run a query, returns annotated rows plus a query_id
  GET  /explain/row  explanation for a row of a previous query
  GET  /explain/cell explanation for a cell of a previous query
  POST /acknowledge  FIX or APPROVE one repair instance
  GET  /lenses       registered lenses
  POST /lens         register a new lens from DDL
"""
from __future__ import annotations

import uuid
from collections import OrderedDict
from typing import Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .algebra import LensRef, PlanError, Table, tree_walk
from .backend import BackendError
from .frontend import CreateLensStatement, ParseError, parse
from .inline import MarkerError
from .normalize import CompileError
from .service import ServiceError, VeilDB
from .strategies import INLINE, QueryTimeout

MAX_CACHED_QUERIES = 100


class QueryRequest(BaseModel):
    sql: str
    strategy: str = INLINE


class AcknowledgeRequest(BaseModel):
    lens: str
    var: str
    args: list
    action: str
    value: Optional[object] = None


class LensRequest(BaseModel):
    ddl: str


def _explanation_json(x):
    return {
        "kind": x.kind,
        "deterministic": x.deterministic,
        "reasons": x.reasons,
        "confidence": x.confidence,
        "variance": x.variance,
        "ci_low": x.ci_low,
        "ci_high": x.ci_high,
        "bound_low": x.bound_low,
        "bound_high": x.bound_high,
        "histogram": [[v, p] for v, p in x.histogram.items()],
        "examples": x.examples,
        "n_samples": x.n_samples,
    }


def _plan_summary(sql, catalog):
    try:
        stmt = parse(sql, catalog)
    except ParseError:
        return {"tables": [], "lenses": []}
    if isinstance(stmt, CreateLensStatement):
        stmt = stmt.inner_select
    tables, lenses = [], []

    def visit(name):
        d = catalog.lens(name)
        if d is not None:
            if d.name not in lenses:
                lenses.append(d.name)
                for t in tree_walk(d.source_query):
                    if isinstance(t, Table):
                        visit(t.name)
                    elif isinstance(t, LensRef):
                        visit(t.name)
        elif name not in tables:
            tables.append(name)

    for t in tree_walk(stmt):
        if isinstance(t, (Table, LensRef)):
            visit(t.name)
    return {"tables": tables, "lenses": lenses}


def create_app(db: VeilDB) -> FastAPI:
    app = FastAPI(title="veil", version="1.0")
    cursors = OrderedDict()

    def remember(cur):
        qid = uuid.uuid4().hex[:12]
        cursors[qid] = cur
        while len(cursors) > MAX_CACHED_QUERIES:
            cursors.popitem(last=False)
        return qid

    def cursor_for(query_id):
        cur = cursors.get(query_id)
        if cur is None:
            raise HTTPException(404, f"unknown query_id {query_id!r}")
        return cur

    @app.post("/query")
    def query(req: QueryRequest):
        try:
            cur = db.execute(req.sql, req.strategy)
        except (ParseError, ServiceError, QueryTimeout, CompileError,
                PlanError, BackendError) as exc:
            raise HTTPException(400, str(exc))
        qid = remember(cur)
        rows = []
        for i in range(len(cur)):
            r = cur.row(i)
            rows.append({"values": list(r.values),
                         "col_det": list(r.col_det),
                         "row_det": r.row_det,
                         "marker": r.marker})
        return {"query_id": qid,
                "columns": list(cur.attrs),
                "rows": rows,
                "missing": cur.non_deterministic_rows_missing(),
                "plan": _plan_summary(req.sql, db.catalog)}

    @app.get("/explain/row")
    def explain_row(marker: str, query_id: str,
                    samples: Optional[int] = None, seed: Optional[int] = None):
        cur = cursor_for(query_id)
        try:
            x = cur._explainer.explain_row(marker, samples, seed)
        except MarkerError as exc:
            raise HTTPException(400, str(exc))
        return _explanation_json(x)

    @app.get("/explain/cell")
    def explain_cell(marker: str, query_id: str, column: str,
                     samples: Optional[int] = None, seed: Optional[int] = None):
        cur = cursor_for(query_id)
        try:
            x = cur._explainer.explain_cell(marker, column, samples, seed)
        except (MarkerError, KeyError) as exc:
            raise HTTPException(400, str(exc))
        return _explanation_json(x)

    @app.post("/acknowledge")
    def acknowledge(req: AcknowledgeRequest):
        try:
            db.acknowledge(req.lens, req.var, tuple(req.args),
                           req.action.upper(), req.value)
        except ServiceError as exc:
            raise HTTPException(400, str(exc))
        return {"ok": True}

    @app.get("/lenses")
    def lenses():
        return {"lenses": db.lenses()}

    @app.post("/lens")
    def create_lens(req: LensRequest):
        try:
            d = db.create_lens(req.ddl)
        except (ParseError, ServiceError) as exc:
            raise HTTPException(400, str(exc))
        except Exception as exc:  # training errors surface as 400s too
            raise HTTPException(400, str(exc))
        return {"ok": True, "name": d.name, "kind": d.kind,
                "model_id": d.model_id}

    return app


def serve(db_path, host="127.0.0.1", port=8000):
    import uvicorn
    app = create_app(VeilDB(db_path))
    uvicorn.run(app, host=host, port=port)
