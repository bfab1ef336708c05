"""Command line shell: run annotated queries against a database file.

Non-deterministic cells print as *value*, non-deterministic rows get a
trailing '!', and each result ends with the count of possibly missing rows.
"""
from __future__ import annotations

import argparse
import sys

from .cursor import DEFAULT_SAMPLES, DEFAULT_SEED
from .frontend import ParseError
from .service import ServiceError, VeilDB
from .strategies import INLINE, STRATEGIES, QueryTimeout


def format_result(cur):
    lines = []
    widths = [len(a) for a in cur.attrs]
    rendered = []
    for i in range(len(cur)):
        r = cur.row(i)
        cells = []
        for j, v in enumerate(r.values):
            text = "NULL" if v is None else str(v)
            if not r.col_det[j]:
                text = f"*{text}*"
            widths[j] = max(widths[j], len(text))
            cells.append(text)
        rendered.append((cells, r.row_det))
    header = "  ".join(a.ljust(w) for a, w in zip(cur.attrs, widths))
    lines.append(header)
    lines.append("-" * len(header))
    for cells, row_det in rendered:
        line = "  ".join(c.ljust(w) for c, w in zip(cells, widths))
        lines.append(line + ("" if row_det else " !"))
    missing = cur.non_deterministic_rows_missing()
    lines.append(f"{missing} rows possibly missing")
    return "\n".join(lines)


def run_statement(db, sql, strategy):
    out = db.run(sql, strategy)
    from .lenses import LensDefinition
    if isinstance(out, LensDefinition):
        return f"lens {out.name} registered ({out.kind})"
    return format_result(out)


def main(argv=None):
    p = argparse.ArgumentParser(
        prog="veil", description="uncertainty-annotated SQL shell")
    p.add_argument("--db", required=True, help="SQLite database file")
    p.add_argument("--strategy", default=INLINE, choices=STRATEGIES)
    p.add_argument("--samples", type=int, default=DEFAULT_SAMPLES,
                   help="Monte-Carlo samples per explanation")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("-e", dest="sql", default=None,
                   help="execute one statement and exit")
    p.add_argument("--serve", action="store_true",
                   help="start the HTTP API instead of a shell")
    p.add_argument("--port", type=int, default=8000)
    args = p.parse_args(argv)

    db = VeilDB(args.db, n_samples=args.samples, base_seed=args.seed)
    if args.serve:
        from .http_api import create_app
        import uvicorn
        uvicorn.run(create_app(db), host="127.0.0.1", port=args.port)
        return 0

    if args.sql is not None:
        try:
            print(run_statement(db, args.sql, args.strategy))
        except (ParseError, ServiceError, QueryTimeout) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        return 0

    # interactive: statements are ';'-terminated
    buf = []
    for line in sys.stdin:
        buf.append(line)
        if line.rstrip().endswith(";"):
            sql = "".join(buf).strip().rstrip(";")
            buf = []
            if not sql:
                continue
            try:
                print(run_statement(db, sql, args.strategy))
            except (ParseError, ServiceError, QueryTimeout) as exc:
                print(f"error: {exc}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
