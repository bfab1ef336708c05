"""HTTP facade: the JSON contract analyst tooling consumes."""
import pytest
from fastapi.testclient import TestClient

from veil import VeilDB
from veil.http_api import create_app


@pytest.fixture()
def client():
    db = VeilDB()
    db.backend.execute("CREATE TABLE t (a INTEGER, b INTEGER)")
    for a, b in [(1, 10), (2, None), (3, 30)]:
        db.backend.execute("INSERT INTO t VALUES (?,?)", (a, b))
    db.create_lens("CREATE LENS fix AS SELECT a, b FROM t "
                   "USING DOMAIN_REPAIR(b int NOT NULL)")
    with TestClient(create_app(db)) as c:
        yield c
    db.close()


def test_query_payload_shape(client):
    r = client.post("/query", json={"sql": "SELECT a, b FROM fix"})
    assert r.status_code == 200
    body = r.json()
    assert set(body) == {"query_id", "columns", "rows", "missing", "plan"}
    assert body["columns"] == ["a", "b"]
    assert len(body["rows"]) == 3
    row = next(x for x in body["rows"] if x["values"][0] == 2)
    assert row["col_det"] == [True, False]
    assert isinstance(row["marker"], str)
    assert body["missing"] == 0
    assert body["plan"] == {"tables": ["t"], "lenses": ["fix"]}


def test_bad_sql_is_a_400(client):
    r = client.post("/query", json={"sql": "SELECT FROM"})
    assert r.status_code == 400


def test_explain_row_and_cell(client):
    q = client.post("/query",
                    json={"sql": "SELECT a FROM fix WHERE b < 20"}).json()
    nd = next(x for x in q["rows"] if not x["row_det"])
    r = client.get("/explain/row", params={
        "marker": nd["marker"], "query_id": q["query_id"], "samples": 400})
    assert r.status_code == 200
    x = r.json()
    assert 0.0 < x["confidence"] < 1.0
    assert x["reasons"]

    q2 = client.post("/query", json={"sql": "SELECT a, b FROM fix"}).json()
    nd2 = next(x for x in q2["rows"] if not x["col_det"][1])
    r2 = client.get("/explain/cell", params={
        "marker": nd2["marker"], "query_id": q2["query_id"],
        "column": "b", "samples": 400})
    assert r2.status_code == 200
    hist = dict(map(tuple, r2.json()["histogram"]))
    assert abs(sum(hist.values()) - 1.0) < 1e-9


def test_explain_unknown_query_id_is_404(client):
    r = client.get("/explain/row",
                   params={"marker": "1", "query_id": "nope"})
    assert r.status_code == 404


def test_acknowledge_flow(client):
    q = client.post("/query", json={"sql": "SELECT a, b FROM fix"}).json()
    nd = next(x for x in q["rows"] if not x["col_det"][1])
    r = client.post("/acknowledge", json={
        "lens": "fix", "var": "b", "args": [nd["marker"]],
        "action": "FIX", "value": 42})
    assert r.status_code == 200 and r.json() == {"ok": True}
    again = client.post("/query", json={"sql": "SELECT a, b FROM fix"}).json()
    fixed = next(x for x in again["rows"] if x["marker"] == nd["marker"])
    assert fixed["values"][1] == 42
    assert fixed["col_det"] == [True, True]


def test_acknowledge_unknown_instance_is_400(client):
    r = client.post("/acknowledge", json={
        "lens": "fix", "var": "b", "args": ["999"], "action": "APPROVE"})
    assert r.status_code == 400


def test_lens_registration_over_http(client):
    r = client.get("/lenses")
    assert [l["name"] for l in r.json()["lenses"]] == ["fix"]
    r2 = client.post("/lens", json={
        "ddl": "CREATE LENS fix2 AS SELECT a, b FROM t "
               "USING DOMAIN_REPAIR(b int NOT NULL)"})
    assert r2.status_code == 200
    assert r2.json()["name"] == "fix2"
    r3 = client.post("/lens", json={"ddl": "CREATE LENS broken AS nonsense"})
    assert r3.status_code == 400


def test_missing_count_is_surfaced(client):
    q = client.post("/query",
                    json={"sql": "SELECT a FROM fix WHERE b > 35"}).json()
    assert q["rows"] == []
    assert q["missing"] == 1
