"""Command-line shell: rendering of annotated results and one-shot mode."""
import pytest

from veil import VeilDB
from veil.cli import format_result, main, run_statement


@pytest.fixture()
def db(tmp_path):
    d = VeilDB(str(tmp_path / "c.db"))
    d.backend.execute("CREATE TABLE t (a INTEGER, b INTEGER)")
    for a, b in [(1, 10), (2, None)]:
        d.backend.execute("INSERT INTO t VALUES (?,?)", (a, b))
    d.create_lens("CREATE LENS fix AS SELECT a, b FROM t "
                  "USING DOMAIN_REPAIR(b int NOT NULL)")
    yield d
    d.close()


def test_format_marks_uncertain_cells(db):
    out = format_result(db.execute("SELECT a, b FROM fix"))
    lines = out.splitlines()
    assert lines[0].split() == ["a", "b"]
    assert any("*10*" in ln for ln in lines)
    assert lines[-1] == "0 rows possibly missing"


def test_format_marks_uncertain_rows_and_missing(db):
    out = format_result(db.execute("SELECT a FROM fix WHERE b < 20"))
    body = out.splitlines()[2:-1]
    assert any(ln.endswith(" !") for ln in body)

    out2 = format_result(db.execute("SELECT a FROM fix WHERE b > 20"))
    assert out2.splitlines()[-1] == "1 rows possibly missing"


def test_run_statement_reports_lens_registration(db):
    msg = run_statement(db, "CREATE LENS fix2 AS SELECT a, b FROM t "
                            "USING DOMAIN_REPAIR(b int NOT NULL)", "inline")
    assert msg == "lens fix2 registered (DOMAIN_REPAIR)"


def test_one_shot_mode(tmp_path, capsys):
    path = str(tmp_path / "m.db")
    d = VeilDB(path)
    d.backend.execute("CREATE TABLE t (a INTEGER)")
    d.backend.execute("INSERT INTO t VALUES (42)")
    d.close()
    rc = main(["--db", path, "-e", "SELECT a FROM t"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "42" in out and "0 rows possibly missing" in out


def test_one_shot_error_exit(tmp_path, capsys):
    path = str(tmp_path / "e.db")
    VeilDB(path).close()
    rc = main(["--db", path, "-e", "SELECT FROM"])
    assert rc == 1
    assert "error:" in capsys.readouterr().err
