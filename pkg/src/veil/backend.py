"""Embedded SQLite backend and the persisted lens catalog.

Only tables under the reserved prefix are ever written; user tables are
read-only from the shim's point of view.
"""
from __future__ import annotations

import hashlib
import json
import sqlite3

from .inline import RESERVED_PREFIX
from .serde import lens_from_json, lens_to_json

CATALOG_TABLE = f"{RESERVED_PREFIX}lenses"


class BackendError(Exception):
    def __init__(self, msg, sql=None):
        super().__init__(msg + (f"\n  sql: {sql}" if sql else ""))
        self.sql = sql


class Backend:
    """Thin connection wrapper; one per database file."""

    def __init__(self, path=":memory:"):
        self.path = path
        # served over HTTP the connection hops worker threads; access is
        # serialized at the request level, so thread affinity is safe to drop
        self.conn = sqlite3.connect(path, check_same_thread=False)
        self.conn.isolation_level = None  # autocommit

    def execute(self, sql, params=()):
        try:
            return self.conn.execute(sql, params)
        except sqlite3.Error as exc:
            raise BackendError(str(exc), sql) from exc

    def executemany(self, sql, rows):
        try:
            return self.conn.executemany(sql, rows)
        except sqlite3.Error as exc:
            raise BackendError(str(exc), sql) from exc

    def close(self):
        self.conn.close()

    def table_names(self, include_reserved=False):
        rows = self.execute(
            "SELECT name FROM sqlite_master WHERE type = 'table' "
            "ORDER BY name").fetchall()
        names = [r[0] for r in rows if not r[0].startswith("sqlite_")]
        if not include_reserved:
            names = [n for n in names if not n.startswith(RESERVED_PREFIX)]
        return names

    def table_columns(self, name):
        rows = self.execute(f'PRAGMA table_info({_qi(name)})').fetchall()
        if not rows:
            return None
        return [r[1] for r in rows]

    def table_column_types(self, name):
        rows = self.execute(f'PRAGMA table_info({_qi(name)})').fetchall()
        return {r[1]: (r[2] or "text") for r in rows}

    def hash_non_reserved_tables(self):
        """Digest of every user table's schema and contents; unchanged before
        and after any query session (environment-isolation check)."""
        h = hashlib.sha256()
        for name in self.table_names(include_reserved=False):
            schema = self.execute(
                "SELECT sql FROM sqlite_master WHERE name = ?",
                (name,)).fetchone()
            h.update(repr(schema).encode())
            for row in self.execute(
                    f"SELECT rowid, * FROM {_qi(name)} ORDER BY rowid"):
                h.update(repr(row).encode())
        return h.hexdigest()


def _qi(name):
    return '"' + name.replace('"', '""') + '"'


class Catalog:
    """Lens catalog persisted in the backend; also answers schema questions
    for the parser and the normalizer."""

    def __init__(self, backend: Backend):
        self.backend = backend
        backend.execute(
            f'CREATE TABLE IF NOT EXISTS "{CATALOG_TABLE}" '
            '(name TEXT PRIMARY KEY, definition TEXT NOT NULL)')
        self._cache = {}

    def lens(self, name):
        name = name.casefold()
        if name in self._cache:
            return self._cache[name]
        row = self.backend.execute(
            f'SELECT definition FROM "{CATALOG_TABLE}" WHERE name = ?',
            (name,)).fetchone()
        if row is None:
            return None
        d = lens_from_json(json.loads(row[0]))
        self._cache[name] = d
        return d

    def lens_names(self):
        return [r[0] for r in self.backend.execute(
            f'SELECT name FROM "{CATALOG_TABLE}" ORDER BY name')]

    def register(self, lens_def, replace=False):
        name = lens_def.name.casefold()
        if not replace and self.lens(name) is not None:
            raise BackendError(f"lens {name!r} already exists")
        payload = json.dumps(lens_to_json(lens_def))
        self.backend.execute(
            f'INSERT OR REPLACE INTO "{CATALOG_TABLE}" VALUES (?, ?)',
            (name, payload))
        self._cache[name] = lens_def

    def table_columns(self, name):
        if name.startswith(RESERVED_PREFIX):
            return None
        return self.backend.table_columns(name)

    def columns_of(self, name):
        """Output attributes of a table or lens, for name resolution."""
        d = self.lens(name)
        if d is not None:
            top = d.body
            return [a for a, _ in top.targets]
        return self.table_columns(name)
