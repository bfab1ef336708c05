"""Benchmark harness: deterministic data generation, exact damage counts,
and the report format."""
import io
import re

from veil import VeilDB
from veil.backend import Backend
from veil.bench import (LENS_NAME, generate_damaged_db, install_lens,
                        run_benchmark, standard_queries)


def test_generator_is_deterministic(tmp_path):
    a = str(tmp_path / "a.db")
    b = str(tmp_path / "b.db")
    generate_damaged_db(a, n_rows=300, damage_rate=0.02, seed=11)
    generate_damaged_db(b, n_rows=300, damage_rate=0.02, seed=11)
    ha = Backend(a).hash_non_reserved_tables()
    hb = Backend(b).hash_non_reserved_tables()
    assert ha == hb
    generate_damaged_db(b, n_rows=300, damage_rate=0.02, seed=12)
    assert Backend(b).hash_non_reserved_tables() != ha


def test_damage_count_is_exact(tmp_path):
    path = str(tmp_path / "d.db")
    generate_damaged_db(path, n_rows=400, damage_rate=0.05, seed=3)
    be = Backend(path)
    nulls = be.execute(
        "SELECT COUNT(*) FROM orders WHERE customer_id IS NULL").fetchone()[0]
    assert nulls == 20
    total = be.execute("SELECT COUNT(*) FROM orders").fetchone()[0]
    assert total == 400
    be.close()


def test_report_lines_and_consistency(tmp_path):
    path = str(tmp_path / "r.db")
    generate_damaged_db(path, n_rows=120, damage_rate=0.02, seed=5)
    buf = io.StringIO()
    queries = [q for q in standard_queries() if q[0] in ("scan", "join2")]
    results = run_benchmark(path, strategies=("classic", "inline"),
                            queries=queries, out=buf)
    pat = re.compile(r"^[a-z0-9_]+,[a-z]+,\d+\.\d,\d+,\d+,[01]$")
    lines = buf.getvalue().strip().splitlines()
    assert all(pat.match(ln) for ln in lines), lines
    # same rows and missing counts independent of the strategy
    per_query = {}
    for r in results:
        if r["strategy"] == "raw":
            continue
        per_query.setdefault(r["query"], set()).add(
            (r["rows"], r["missing"]))
    assert all(len(v) == 1 for v in per_query.values()), per_query


def test_install_lens_is_idempotent(tmp_path):
    path = str(tmp_path / "l.db")
    generate_damaged_db(path, n_rows=60, damage_rate=0.05, seed=2)
    db = VeilDB(path)
    install_lens(db)
    install_lens(db)
    assert [l["name"] for l in db.lenses()] == [LENS_NAME]
    cur = db.execute(f"SELECT id, customer_id FROM {LENS_NAME}")
    assert len(cur) == 60
    repaired = [r for r in cur.fetchall() if not all(r.col_det)]
    assert len(repaired) == 3
    db.close()
