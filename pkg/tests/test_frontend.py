"""Parser coverage: the supported SELECT subset evaluates exactly like the
backend, and everything outside the subset is rejected with a clear error."""
import sqlite3

import pytest

from veil import VeilDB
from veil.frontend import ParseError, parse
from veil.strategies import CLASSIC, INLINE


@pytest.fixture()
def db():
    d = VeilDB()
    d.backend.execute("CREATE TABLE items (id INTEGER, name TEXT, price REAL)")
    for row in [(1, "apple", 2.5), (2, "pear", 3.0), (3, "plum", None)]:
        d.backend.execute("INSERT INTO items VALUES (?,?,?)", row)
    d.backend.execute("CREATE TABLE tags (item_id INTEGER, tag TEXT)")
    for row in [(1, "fruit"), (2, "fruit"), (2, "green")]:
        d.backend.execute("INSERT INTO tags VALUES (?,?)", row)
    yield d
    d.close()


def both(db, sql):
    """Rows through the shim (no lenses involved) and straight from SQLite."""
    got = [r.values for r in db.execute(sql, strategy=CLASSIC).fetchall()]
    raw = sqlite3.connect(":memory:")
    raw.execute("CREATE TABLE items (id INTEGER, name TEXT, price REAL)")
    raw.executemany("INSERT INTO items VALUES (?,?,?)",
                    [(1, "apple", 2.5), (2, "pear", 3.0), (3, "plum", None)])
    raw.execute("CREATE TABLE tags (item_id INTEGER, tag TEXT)")
    raw.executemany("INSERT INTO tags VALUES (?,?)",
                    [(1, "fruit"), (2, "fruit"), (2, "green")])
    want = [tuple(r) for r in raw.execute(sql).fetchall()]
    return sorted(got), sorted(want)


@pytest.mark.parametrize("sql", [
    "SELECT id, name, price FROM items",
    "SELECT * FROM items",
    "SELECT id + 1 AS nxt, price * 2 FROM items",
    "SELECT id FROM items WHERE price > 2.6",
    "SELECT id FROM items WHERE price IS NULL",
    "SELECT id FROM items WHERE price IS NOT NULL AND id < 3",
    "SELECT id FROM items WHERE NOT (id = 2 OR id = 3)",
    "SELECT CASE WHEN id = 1 THEN 'one' ELSE 'many' END AS label FROM items",
    "SELECT CAST(id AS TEXT) || ':' || name AS tag FROM items",
    "SELECT i.name, t.tag FROM items i JOIN tags t ON i.id = t.item_id",
    "SELECT i.name, t.tag FROM items i, tags t WHERE i.id = t.item_id",
    "SELECT id FROM items UNION ALL SELECT item_id AS id FROM tags",
    "SELECT s.nxt FROM (SELECT id + 1 AS nxt FROM items) s WHERE s.nxt > 2",
    "SELECT -id, 3 - -2 AS d FROM items",
    "SELECT 'it''s' AS quoted FROM items WHERE id = 1",
])
def test_select_subset_matches_backend(db, sql):
    got, want = both(db, sql)
    assert got == want


def test_every_strategy_handles_plain_tables(db):
    for strategy in ("classic", "partition", "inline", "hybrid"):
        cur = db.execute("SELECT id, name FROM items WHERE id >= 2",
                         strategy=strategy)
        assert sorted(r.values for r in cur.fetchall()) == \
            [(2, "pear"), (3, "plum")]
        assert all(cur.is_row_deterministic(i) for i in range(len(cur)))
        assert cur.non_deterministic_rows_missing() == 0


def test_expression_only_select(db):
    cur = db.execute("SELECT 1 + 2 * 3 AS x, 'a' || 'b' AS y", strategy=INLINE)
    assert cur.fetchone().values == (7, "ab")


@pytest.mark.parametrize("sql,needle", [
    ("SELECT id FROM items ORDER BY id", "ORDER"),
    ("SELECT id FROM items GROUP BY id", "GROUP"),
    ("SELECT id FROM items LIMIT 3", "LIMIT"),
    ("SELECT count(*) FROM items", "aggregation"),
    ("SELECT sum(price) FROM items", "aggregation"),
    ("SELECT DISTINCT id FROM items", "DISTINCT"),
    ("SELECT (SELECT id FROM items) FROM items", "subquer"),
    ("SELECT id FROM items UNION SELECT item_id FROM tags", "UNION ALL"),
    ("SELECT id FROM items LEFT JOIN tags ON 1 = 1", "INNER JOIN"),
    ("SELECT id FROM (SELECT id FROM items)", "alias"),
    ("SELECT id FROM items a, tags a", "duplicate"),
    ("SELECT CAST(id AS INTEGER) FROM items", "CAST AS TEXT"),
    ("SELECT nope FROM items", "unknown column"),
    ("SELECT id FROM ghosts", "unknown table"),
    ("SELECT i.id, t.item_id AS id FROM items i, tags t", "duplicate"),
])
def test_rejections(db, sql, needle):
    with pytest.raises(ParseError) as err:
        db.execute(sql)
    assert needle.casefold() in str(err.value).casefold()


def test_ambiguous_bare_column_is_rejected(db):
    db.backend.execute("CREATE TABLE items2 (id INTEGER)")
    with pytest.raises(ParseError) as err:
        db.execute("SELECT id FROM items, items2")
    assert "ambiguous" in str(err.value)


def test_qualified_columns_disambiguate(db):
    db.backend.execute("CREATE TABLE items2 (id INTEGER)")
    db.backend.execute("INSERT INTO items2 VALUES (9)")
    cur = db.execute("SELECT items.id AS a, items2.id AS b FROM items, items2 "
                     "WHERE items.id = 1")
    assert cur.fetchone().values == (1, 9)


def test_parse_without_catalog_keeps_raw_tree():
    tree = parse("SELECT a FROM t WHERE a > 1")
    # no catalog: names stay unqualified and unvalidated
    assert tree is not None


def test_create_lens_statement_shape():
    stmt = parse("CREATE LENS fixer AS SELECT a, b FROM t "
                 "USING DOMAIN_REPAIR(b int NOT NULL, NO LIMIT)")
    assert stmt.name == "fixer"
    assert stmt.lens_kind == "DOMAIN_REPAIR"
    assert stmt.param_list == (("b", "int", ("NOT NULL",)),)


def test_create_lens_rejects_misplaced_no_limit():
    with pytest.raises(ParseError):
        parse("CREATE LENS f AS SELECT a FROM t "
              "USING DOMAIN_REPAIR(NO LIMIT, a int)")


def test_rowid_is_queryable(db):
    # qualified rowid is the backend's integer row identifier; the bare
    # keyword denotes the provenance marker, a string
    cur = db.execute("SELECT items.rowid AS rid, id FROM items "
                     "WHERE items.rowid = 2")
    assert cur.fetchone().values == (2, 2)
    cur = db.execute("SELECT rowid AS m, id FROM items WHERE id = 2")
    assert cur.fetchone().values == ("2", 2)
