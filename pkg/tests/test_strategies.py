"""Execution strategy plumbing: acceptance snapshots, result-set layout,
and the wall-clock cap."""
import pytest

from veil import VeilDB
from veil.frontend import parse
from veil.inline import best_guess_table_name
from veil.normalize import expand_lenses, normalize
from veil.strategies import (Acceptance, QueryTimeout, run_classic,
                             run_strategy)


@pytest.fixture()
def db():
    d = VeilDB()
    d.backend.execute("CREATE TABLE t (a INTEGER, b INTEGER)")
    for a, b in [(1, 10), (2, None), (3, 30)]:
        d.backend.execute("INSERT INTO t VALUES (?,?)", (a, b))
    d.create_lens("CREATE LENS fix AS SELECT a, b FROM t "
                  "USING DOMAIN_REPAIR(b int NOT NULL)")
    yield d
    d.close()


def test_acceptance_snapshot_lookup(db):
    table = best_guess_table_name("fix", "b")
    acc = Acceptance.load(db.backend, [table])
    assert acc.lookup(table, "accepted", ("2",)) == 0
    assert acc.lookup(table, "accepted_value", ("2",)) is None
    assert acc.lookup(table, "value", ("2",)) is not None
    assert acc.lookup(table, "value", ("999",)) is None

    db.acknowledge("fix", "b", ["2"], "FIX", value=55)
    acc2 = Acceptance.load(db.backend, [table])
    assert acc2.lookup(table, "accepted", ("2",)) == 1
    assert acc2.lookup(table, "accepted_value", ("2",)) == 55
    assert acc2.lookup(table, "value", ("2",)) == 55


def test_resultset_layout(db):
    nf = normalize(expand_lenses(
        parse("SELECT a, b FROM fix", db.catalog), db.catalog))
    rs = run_classic(nf, db._context())
    assert rs.attrs == ("a", "b")
    assert len(rs) == 3
    for i in range(len(rs)):
        assert isinstance(rs.values(i), tuple)
        assert isinstance(rs.marker(i), str)
        assert all(isinstance(d, bool) for d in rs.col_det(i))
        assert isinstance(rs.row_det(i), bool)
    assert rs.missing == 0


def test_unknown_strategy_name_fails(db):
    nf = normalize(expand_lenses(
        parse("SELECT a FROM t", db.catalog), db.catalog))
    with pytest.raises(ValueError):
        run_strategy("warp", nf, db._context())


def test_wall_clock_cap(db):
    # a 5-way self cross product of a non-trivial table blows past any
    # microscopic cap
    db.backend.execute("CREATE TABLE big (x INTEGER)")
    db.backend.executemany("INSERT INTO big VALUES (?)",
                           [(i,) for i in range(60)])
    sql = ("SELECT t1.x AS a FROM big t1, big t2, big t3, big t4, big t5 "
           "WHERE t1.x < t2.x")
    with pytest.raises(QueryTimeout):
        db.execute(sql, strategy="classic", cap=0.005)


def test_partition_metadata_is_exposed(db):
    cur = db.execute("SELECT a FROM fix WHERE b < 20", strategy="partition")
    parts = cur.meta.get("partitions")
    assert parts and all({"deterministic", "millis", "rows"} <= set(p)
                         for p in parts)
    assert any(p["deterministic"] for p in parts)
    assert any(not p["deterministic"] for p in parts)
