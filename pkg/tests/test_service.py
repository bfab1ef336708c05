"""Service facade: lens DDL dispatch, acknowledgment durability, and
environment isolation."""
import pytest

from veil import APPROVE, FIX, VeilDB
from veil.backend import BackendError
from veil.lenses import LensDefinition
from veil.service import ServiceError


def seed_orders(db):
    db.backend.execute("CREATE TABLE orders (id INTEGER, region TEXT)")
    for i, r in [(1, "east"), (2, "east"), (3, None), (4, "west")]:
        db.backend.execute("INSERT INTO orders VALUES (?,?)", (i, r))


def make_lens(db):
    return db.create_lens("CREATE LENS clean AS SELECT id, region FROM orders "
                          "USING DOMAIN_REPAIR(region text NOT NULL)")


def test_run_dispatches_ddl_and_queries():
    db = VeilDB()
    seed_orders(db)
    out = db.run("CREATE LENS clean AS SELECT id, region FROM orders "
                 "USING DOMAIN_REPAIR(region text NOT NULL)")
    assert isinstance(out, LensDefinition)
    cur = db.run("SELECT id, region FROM clean")
    assert len(cur) == 4
    db.close()


def test_duplicate_lens_is_rejected():
    db = VeilDB()
    seed_orders(db)
    make_lens(db)
    with pytest.raises(BackendError):
        make_lens(db)
    db.close()


def test_unknown_strategy_is_rejected():
    db = VeilDB()
    seed_orders(db)
    with pytest.raises(ServiceError) as err:
        db.execute("SELECT id FROM orders", strategy="turbo")
    assert "turbo" in str(err.value)
    db.close()


def test_lens_listing_carries_model_identity():
    db = VeilDB()
    seed_orders(db)
    d = make_lens(db)
    listing = db.lenses()
    assert listing == [{
        "name": "clean", "kind": "DOMAIN_REPAIR", "model_id": d.model_id,
        "columns": ["id", "region"], "variables": ["region"],
    }]
    assert len(d.model_id) == 16
    db.close()


def test_acknowledge_validates_instance():
    db = VeilDB()
    seed_orders(db)
    make_lens(db)
    with pytest.raises(ServiceError):
        db.acknowledge("clean", "region", ["999"], FIX, "east")
    with pytest.raises(ServiceError):
        db.acknowledge("clean", "nope", ["3"], FIX, "east")
    with pytest.raises(ServiceError):
        db.acknowledge("clean", "region", ["3"], "SHRUG")
    db.close()


def test_acknowledgments_survive_reopen(tmp_path):
    path = str(tmp_path / "orders.db")
    db = VeilDB(path)
    seed_orders(db)
    make_lens(db)
    db.acknowledge("clean", "region", ["3"], FIX, "west")
    db.close()

    db2 = VeilDB(path)
    cur = db2.execute("SELECT id, region FROM clean")
    fixed = next(r for r in cur.fetchall() if r["id"] == 3)
    assert fixed["region"] == "west"
    assert fixed.col_det[1] is True
    db2.close()


def test_approve_keeps_best_guess(tmp_path):
    db = VeilDB()
    seed_orders(db)
    make_lens(db)
    before = db.execute("SELECT id, region FROM clean")
    guess = next(r for r in before.fetchall() if r["id"] == 3)["region"]
    db.acknowledge("clean", "region", ["3"], APPROVE)
    after = db.execute("SELECT id, region FROM clean")
    row = next(r for r in after.fetchall() if r["id"] == 3)
    assert row["region"] == guess
    assert row.col_det[1] is True
    db.close()


def test_environment_hash_ignores_reserved_tables():
    db = VeilDB()
    seed_orders(db)
    h0 = db.environment_hash()
    make_lens(db)  # writes only reserved tables
    db.execute("SELECT id, region FROM clean WHERE region = 'east'")
    db.acknowledge("clean", "region", ["3"], APPROVE)
    assert db.environment_hash() == h0
    db.backend.execute("INSERT INTO orders VALUES (5, 'east')")
    assert db.environment_hash() != h0
    db.close()


def test_lens_over_lens_composes():
    db = VeilDB()
    db.backend.execute("CREATE TABLE t (a INTEGER, b INTEGER, c INTEGER)")
    for row in [(1, 1, None), (2, None, 2), (3, 3, 3)]:
        db.backend.execute("INSERT INTO t VALUES (?,?,?)", row)
    db.create_lens("CREATE LENS l1 AS SELECT a, b, c FROM t "
                   "USING DOMAIN_REPAIR(b int NOT NULL)")
    db.create_lens("CREATE LENS l2 AS SELECT a, b, c FROM l1 "
                   "USING DOMAIN_REPAIR(c int NOT NULL)")
    cur = db.execute("SELECT a, b, c FROM l2")
    assert len(cur) == 3
    nd = [(r["a"], r.col_det) for r in cur.fetchall() if not all(r.col_det)]
    assert {a for a, _ in nd} == {1, 2}
    db.close()


def test_plan_and_context_caches_invalidate():
    db = VeilDB()
    seed_orders(db)
    make_lens(db)
    sql = "SELECT id, region FROM clean"
    first = db.execute(sql)
    nd = next(r for r in first.fetchall() if not all(r.col_det))
    db.acknowledge("clean", "region", [nd.marker], APPROVE)
    second = db.execute(sql)  # same cached plan, fresh acceptance
    assert all(all(r.col_det) for r in second.fetchall())
    db.close()
