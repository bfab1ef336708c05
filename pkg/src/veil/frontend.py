"""SQL surface: parser for the supported subset and backend SQL renderer.

Supported statements: SELECT (expressions, arithmetic, CASE WHEN, CAST,
string concat), FROM with comma joins, INNER JOIN .. ON, WHERE, UNION ALL,
and CREATE LENS.  Aggregates, ORDER BY and expression subqueries are
rejected with position-annotated errors.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .algebra import (Cross, LensRef, PlanError, Project, Select, Table,
                      Union, Unit, output_columns, rid_col, scoped)
from .expr import (And, Arith, BestGuessLookup, BoolConst, BoolValue,
                   CastText, ColumnRef, Comparison, Concat, Conditional,
                   Constant, FALSE, IsFalse, IsNull, IsTrue, Not, Or,
                   RowIdRef, TRUE, UNKNOWN, VarTerm)


class ParseError(Exception):
    def __init__(self, msg, pos=None):
        super().__init__(f"{msg}" + (f" (at offset {pos})" if pos is not None else ""))
        self.pos = pos


@dataclass(frozen=True)
class CreateLensStatement:
    name: str
    inner_select: object  # raw OperatorTree of the source SELECT
    lens_kind: str
    param_list: tuple     # of (name, type, modifiers-tuple)


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>\d+\.\d+|\d+)
  | (?P<str>'(?:[^']|'')*')
  | (?P<qid>"(?:[^"]|"")*")
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>\|\||<=|>=|<>|!=|[(),.;*/+\-=<>])
""", re.VERBOSE)

AGGREGATES = {"count", "sum", "avg", "min", "max"}

# keywords an implicit (AS-less) alias may never swallow
_NOT_AN_ALIAS = {"from", "where", "union", "using", "inner", "join", "on",
                 "order", "group", "having", "limit", "left", "right",
                 "full", "cross", "natural", "outer"}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int


def tokenize(text):
    out, i = [], 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if not m:
            raise ParseError(f"unexpected character {text[i]!r}", i)
        kind = m.lastgroup
        if kind != "ws":
            out.append(Token(kind, m.group(), i))
        i = m.end()
    out.append(Token("eof", "", len(text)))
    return out


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

@dataclass
class _FromItem:
    source: object        # Table | LensRef | OperatorTree (subselect)
    name: str             # source name, "" for subselects
    alias: str


@dataclass
class _SelectSpec:
    items: list           # of (alias-or-None, expr) ; or the string "*"
    from_items: list      # of _FromItem
    where: object         # BoolExpr or None
    joins: list = field(default_factory=list)  # ON predicates


class Parser:
    def __init__(self, tokens):
        self.toks = tokens
        self.i = 0

    def peek(self, ahead=0):
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def next(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def kw(self, *words):
        """Consume the keyword sequence if present."""
        for off, w in enumerate(words):
            t = self.peek(off)
            if t.kind != "id" or t.text.casefold() != w:
                return False
        self.i += len(words)
        return True

    def expect_kw(self, *words):
        if not self.kw(*words):
            t = self.peek()
            raise ParseError(f"expected {' '.join(words).upper()}, got {t.text!r}", t.pos)

    def expect_op(self, op):
        t = self.peek()
        if t.kind != "op" or t.text != op:
            raise ParseError(f"expected {op!r}, got {t.text!r}", t.pos)
        self.next()

    def at_op(self, *ops):
        t = self.peek()
        return t.kind == "op" and t.text in ops

    def ident(self):
        t = self.peek()
        if t.kind == "id":
            self.next()
            return t.text.casefold()
        if t.kind == "qid":
            self.next()
            return t.text[1:-1].replace('""', '"')
        raise ParseError(f"expected identifier, got {t.text!r}", t.pos)

    # -- statements ---------------------------------------------------------

    def statement(self):
        if self.kw("create", "lens"):
            return self.create_lens()
        spec = self.select_union()
        self.finish()
        return spec

    def finish(self):
        if self.at_op(";"):
            self.next()
        t = self.peek()
        if t.kind != "eof":
            low = t.text.casefold()
            if low in ("order", "group", "having"):
                raise ParseError(f"{low.upper()} is not supported", t.pos)
            if low == "limit":
                raise ParseError("LIMIT is not supported", t.pos)
            raise ParseError(f"unexpected trailing input {t.text!r}", t.pos)

    def create_lens(self):
        name = self.ident()
        self.expect_kw("as")
        inner = self.select_union()
        self.expect_kw("using")
        kind = self.ident().upper()
        self.expect_op("(")
        params = []
        while True:
            if self.kw("no", "limit"):
                params_done = self.at_op(")")
                if not params_done:
                    raise ParseError("NO LIMIT must be the last lens parameter",
                                     self.peek().pos)
                break
            pname = self.ident()
            ptype = self.ident()
            mods = []
            if self.kw("not", "null"):
                mods.append("NOT NULL")
            params.append((pname, ptype, tuple(mods)))
            if self.at_op(","):
                self.next()
                continue
            break
        self.expect_op(")")
        self.finish()
        if len({p[0] for p in params}) != len(params):
            raise ParseError("duplicate lens parameter names")
        return CreateLensStatement(name, inner, kind, tuple(params))

    # -- queries ------------------------------------------------------------

    def select_union(self):
        spec = self.select_core()
        while True:
            if self.kw("union"):
                if not self.kw("all"):
                    raise ParseError("only UNION ALL is supported",
                                     self.peek().pos)
                rhs = self.select_core()
                spec = ("union", spec, rhs)
            else:
                return spec

    def select_core(self):
        self.expect_kw("select")
        if self.kw("distinct"):
            raise ParseError("DISTINCT is not supported", self.peek().pos)
        items = self.select_items()
        from_items, joins = [], []
        where = None
        if self.kw("from"):
            from_items.append(self.from_item())
            while True:
                if self.at_op(","):
                    self.next()
                    from_items.append(self.from_item())
                elif self.kw("inner", "join") or self.kw("join"):
                    from_items.append(self.from_item())
                    self.expect_kw("on")
                    joins.append(self.bool_expr())
                else:
                    t = self.peek()
                    if t.kind == "id" and t.text.casefold() in (
                            "left", "right", "full", "cross", "natural"):
                        raise ParseError(
                            f"only INNER JOIN is supported, got "
                            f"{t.text.upper()} JOIN", t.pos)
                    break
        if self.kw("where"):
            where = self.bool_expr()
        return _SelectSpec(items, from_items, where, joins)

    def select_items(self):
        if self.at_op("*"):
            self.next()
            return "*"
        items = []
        while True:
            e = self.num_expr()
            alias = None
            if self.kw("as"):
                alias = self.ident()
            elif self.peek().kind in ("id", "qid") and \
                    self.peek().text.casefold() not in _NOT_AN_ALIAS:
                alias = self.ident()
            items.append((alias, e))
            if self.at_op(","):
                self.next()
                continue
            return items

    def from_item(self):
        if self.at_op("("):
            self.next()
            inner = self.select_union()
            self.expect_op(")")
            alias = ""
            if self.kw("as"):
                alias = self.ident()
            elif self.peek().kind in ("id", "qid") and \
                    self.peek().text.casefold() not in _NOT_AN_ALIAS:
                alias = self.ident()
            if not alias:
                raise ParseError("a FROM subquery needs an alias",
                                 self.peek().pos)
            return _FromItem(inner, "", alias)
        name = self.ident()
        alias = name
        if self.kw("as"):
            alias = self.ident()
        elif self.peek().kind in ("id", "qid") and \
                self.peek().text.casefold() not in _NOT_AN_ALIAS:
            alias = self.ident()
        return _FromItem(None, name, alias)

    # -- boolean expressions --------------------------------------------------

    def bool_expr(self):
        e = self.bool_and()
        while self.kw("or"):
            e = Or(e, self.bool_and())
        return e

    def bool_and(self):
        e = self.bool_not()
        while self.kw("and"):
            e = And(e, self.bool_not())
        return e

    def bool_not(self):
        if self.kw("not"):
            return Not(self.bool_not())
        return self.bool_atom()

    def bool_atom(self):
        if self.at_op("("):
            # Could be a parenthesized boolean or a numeric subexpression;
            # try boolean first, fall back to a comparison on a numeric one.
            save = self.i
            try:
                self.next()
                e = self.bool_expr()
                self.expect_op(")")
                if self.kw("is"):
                    v = self.peek()
                    if v.kind == "num" and v.text in ("0", "1"):
                        self.next()
                        return IsTrue(e) if v.text == "1" else IsFalse(e)
                    raise ParseError("expected 0 or 1 after boolean IS", v.pos)
                if not self._at_comparison():
                    return e
            except ParseError:
                pass
            self.i = save
        lhs = self.num_expr()
        t = self.peek()
        if t.kind == "op" and t.text in ("=", "!=", "<>", "<", "<=", ">", ">="):
            self.next()
            op = "!=" if t.text == "<>" else t.text
            return Comparison(op, lhs, self.num_expr())
        if self.kw("is"):
            if self.kw("not", "null"):
                return Not(IsNull(lhs))
            if self.kw("null"):
                return IsNull(lhs)
            v = self.peek()
            if v.kind == "num":
                self.next()
                if v.text == "1":
                    return _is_one(lhs)
                if v.text == "0":
                    return _is_zero(lhs)
            raise ParseError("expected NULL, 0 or 1 after IS", v.pos)
        raise ParseError("expected a comparison or IS test", t.pos)

    def _at_comparison(self):
        t = self.peek()
        return (t.kind == "op" and t.text in
                ("=", "!=", "<>", "<", "<=", ">", ">=")) or \
               (t.kind == "id" and t.text.casefold() == "is")

    # -- numeric expressions --------------------------------------------------

    def num_expr(self):
        e = self.num_term()
        while True:
            if self.at_op("+", "-"):
                op = self.next().text
                e = Arith(op, e, self.num_term())
            elif self.at_op("||"):
                self.next()
                e = Concat((e, self.num_term()))
            else:
                return e

    def num_term(self):
        e = self.num_factor()
        while self.at_op("*", "/"):
            op = self.next().text
            e = Arith(op, e, self.num_factor())
        return e

    def num_factor(self):
        t = self.peek()
        if self.at_op("-"):
            self.next()
            return Arith("-", Constant(0), self.num_factor())
        if self.at_op("("):
            if self.peek(1).kind == "id" and \
                    self.peek(1).text.casefold() == "select":
                raise ParseError("subqueries are not supported here", t.pos)
            self.next()
            e = self.num_expr()
            self.expect_op(")")
            return e
        if t.kind == "num":
            self.next()
            return Constant(float(t.text) if "." in t.text else int(t.text))
        if t.kind == "str":
            self.next()
            return Constant(t.text[1:-1].replace("''", "'"))
        if t.kind == "id" and t.text.casefold() in AGGREGATES and \
                self.peek(1).kind == "op" and self.peek(1).text == "(":
            raise ParseError(
                f"aggregation is not supported ({t.text.upper()})", t.pos)
        if self.kw("case"):
            return self.case_expr()
        if self.kw("cast"):
            self.expect_op("(")
            e = self.num_expr()
            self.expect_kw("as")
            ty = self.ident()
            self.expect_op(")")
            if ty.casefold() != "text":
                raise ParseError(f"only CAST AS TEXT is supported, got {ty!r}", t.pos)
            return CastText(e)
        if self.kw("null"):
            return Constant(None)
        if t.kind in ("id", "qid"):
            name = self.ident()
            if self.at_op(".") :
                self.next()
                col = self.ident()
                if col == "rowid":
                    return ColumnRef(f"{name}.rowid")
                return ColumnRef(f"{name}.{col}")
            if name == "rowid":
                return RowIdRef()
            return ColumnRef(name)
        raise ParseError(f"unexpected token {t.text!r}", t.pos)

    def case_expr(self):
        arms = []
        while self.kw("when"):
            c = self.bool_expr()
            self.expect_kw("then")
            arms.append((c, self.num_expr()))
        otherwise = Constant(None)
        if self.kw("else"):
            otherwise = self.num_expr()
        self.expect_kw("end")
        if not arms:
            raise ParseError("CASE needs at least one WHEN arm", self.peek().pos)
        e = otherwise
        for c, v in reversed(arms):
            e = Conditional(c, v, e)
        return e


def _is_one(lhs):
    if isinstance(lhs, BoolValue):
        return IsTrue(lhs.expr)
    return Comparison("=", lhs, Constant(1))


def _is_zero(lhs):
    if isinstance(lhs, BoolValue):
        return IsFalse(lhs.expr)
    return Comparison("=", lhs, Constant(0))


# ---------------------------------------------------------------------------
# Name resolution and tree building
# ---------------------------------------------------------------------------

def _source_columns(item, catalog):
    if item.source is not None and item.name == "":
        return list(output_columns(item.source)), item.source
    if catalog is not None and catalog.lens(item.name) is not None:
        return list(catalog.columns_of(item.name)), LensRef(item.name)
    if catalog is not None:
        cols = catalog.columns_of(item.name)
        if cols is None:
            raise ParseError(f"unknown table or lens {item.name!r}")
        cols = list(cols)
        if "rowid" not in cols:
            cols = cols + ["rowid"]
        return cols, Table(item.name)
    return None, Table(item.name)


def _default_attr(e, i):
    if isinstance(e, ColumnRef):
        return e.name.split(".")[-1]
    if isinstance(e, Constant) and e.value is not None:
        return str(e.value)
    return f"col{i + 1}"


def _resolve_expr(e, env, where=""):
    from .expr import transform

    def step(n):
        if isinstance(n, ColumnRef):
            if n.name in env:
                r = env[n.name]
                if r is None:
                    raise ParseError(f"ambiguous column {n.name!r}{where}")
                return r
            raise ParseError(f"unknown column {n.name!r}{where}")
        return n

    return transform(e, step)


def _build_tree(spec, catalog):
    if isinstance(spec, tuple) and spec[0] == "union":
        return Union(_build_tree(spec[1], catalog),
                     _build_tree(spec[2], catalog))

    if not spec.from_items:
        if spec.items == "*":
            raise ParseError("SELECT * needs a FROM clause")
        from .expr import walk
        for _, e in spec.items:
            for n in walk(e):
                if isinstance(n, (ColumnRef, RowIdRef)):
                    raise ParseError(
                        f"column reference without a FROM clause: "
                        f"{getattr(n, 'name', 'rowid')!r}")
        targets = tuple((alias or _default_attr(e, i), e)
                        for i, (alias, e) in enumerate(spec.items))
        tree = Unit()
        if spec.where is not None:
            tree = Select(spec.where, tree)
        return Project(targets, tree)

    resolved = catalog is not None
    env = {}
    wrapped = []
    aliases = set()
    for item in spec.from_items:
        if item.alias in aliases:
            raise ParseError(f"duplicate source alias {item.alias!r}")
        aliases.add(item.alias)
        if item.name == "" and isinstance(item.source, (_SelectSpec, tuple)):
            item.source = _build_tree(item.source, catalog)
        cols, src = _source_columns(item, catalog)
        if cols is None:  # raw mode: no schema knowledge, no qualification
            wrapped.append(src)
            continue
        qt = []
        for c in cols:
            qname = f"{item.alias}.{c}"
            qt.append((qname, ColumnRef(c)))
            env[qname] = ColumnRef(qname)
            if c in env:
                env[c] = None  # ambiguous bare name
            else:
                env[c] = ColumnRef(qname)
        wrapped.append(Project(tuple(qt), src))

    tree = wrapped[0]
    for w in wrapped[1:]:
        tree = Cross(tree, w)

    def rx(e, where):
        return _resolve_expr(e, env, where) if resolved else e

    for pred in spec.joins:
        tree = Select(rx(pred, " in JOIN condition"), tree)
    if spec.where is not None:
        tree = Select(rx(spec.where, " in WHERE"), tree)

    if spec.items == "*":
        if not resolved:
            raise ParseError("SELECT * requires schema information")
        targets = []
        for item in spec.from_items:
            cols, _ = _source_columns(item, catalog)
            for c in cols:
                if c == "rowid":
                    continue
                qname = f"{item.alias}.{c}"
                out = c if env.get(c) is not None else qname
                targets.append((out, ColumnRef(qname)))
        return Project(tuple(targets), tree)

    targets = []
    for i, (alias, e) in enumerate(spec.items):
        targets.append((alias or _default_attr(e, i), rx(e, " in SELECT list")))
    try:
        return Project(tuple(targets), tree)
    except PlanError as exc:
        raise ParseError(str(exc))


def parse(sql_text, catalog=None):
    """Parse one statement.  With a catalog, column references are resolved
    and qualified; without one, the raw syntactic tree is returned."""
    p = Parser(tokenize(sql_text))
    stmt = p.statement()
    if isinstance(stmt, CreateLensStatement):
        return CreateLensStatement(stmt.name,
                                   _build_tree(stmt.inner_select, catalog),
                                   stmt.lens_kind, stmt.param_list)
    return _build_tree(stmt, catalog)


# ---------------------------------------------------------------------------
# SQL rendering
# ---------------------------------------------------------------------------

def _q(name):
    return '"' + str(name).replace('"', '""') + '"'


def _lit(v):
    if v is None:
        return "NULL"
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, float)):
        return repr(v)
    return "'" + str(v).replace("'", "''") + "'"


def render_expr(e, env=None):
    env = env or {}
    r = lambda x: render_expr(x, env)
    if isinstance(e, Constant):
        return _lit(e.value)
    if isinstance(e, ColumnRef):
        return env.get(e.name) or _q(e.name)
    if isinstance(e, RowIdRef):
        raise PlanError("unresolved ROWID reference in backend SQL")
    if isinstance(e, VarTerm):
        raise PlanError("Var term reached backend SQL")
    if isinstance(e, Arith):
        return f"({r(e.lhs)} {e.op} {r(e.rhs)})"
    if isinstance(e, Concat):
        return "(" + " || ".join(r(p) for p in e.parts) + ")"
    if isinstance(e, CastText):
        return f"CAST({r(e.child)} AS TEXT)"
    if isinstance(e, Conditional):
        return (f"CASE WHEN {r(e.cond)} THEN {r(e.then)} "
                f"ELSE {r(e.otherwise)} END")
    if isinstance(e, BoolValue):
        return f"({r(e.expr)})"
    if isinstance(e, BestGuessLookup):
        key = " AND ".join(f"{_q(f'param{i + 1}')} = ({r(p)})"
                           for i, p in enumerate(e.params))
        where = f" WHERE {key}" if key else ""
        if e.what == "value":
            sel = 'COALESCE("override", "value")'
        elif e.what == "accepted":
            sel = '"accepted"'
        elif e.what == "accepted_value":
            sel = ('CASE WHEN "accepted" = 1 THEN '
                   'COALESCE("override", "value") ELSE NULL END')
        else:
            raise PlanError(f"unknown lookup kind {e.what!r}")
        return f"(SELECT {sel} FROM {_q(e.table)}{where})"
    if isinstance(e, Comparison):
        return f"({r(e.lhs)} {e.op} {r(e.rhs)})"
    if isinstance(e, And):
        return f"({r(e.lhs)} AND {r(e.rhs)})"
    if isinstance(e, Or):
        return f"({r(e.lhs)} OR {r(e.rhs)})"
    if isinstance(e, Not):
        return f"(NOT {r(e.child)})"
    if isinstance(e, IsNull):
        return f"({r(e.child)} IS NULL)"
    if isinstance(e, BoolConst):
        return "NULL" if e.value is None else ("1" if e.value else "0")
    if isinstance(e, IsTrue):
        return f"(({r(e.child)}) IS 1)"
    if isinstance(e, IsFalse):
        return f"(({r(e.child)}) IS 0)"
    raise PlanError(f"cannot render {type(e).__name__}")


def _flatten(t):
    preds, sources = [], []

    def rec(n):
        if isinstance(n, Select):
            preds.append(n.pred)
            rec(n.src)
        elif isinstance(n, Cross):
            rec(n.lhs)
            rec(n.rhs)
        else:
            sources.append(n)

    rec(t)
    return preds, sources


def render_sql(q, _counter=None):
    """Backend SQL for a deterministic operator tree."""
    if _counter is None:
        _counter = [0]
    if isinstance(q, Union):
        return (render_sql(q.lhs, _counter) + " UNION ALL " +
                render_sql(q.rhs, _counter))

    if isinstance(q, Project):
        targets = q.targets
        body = q.src
    else:
        targets = tuple((c, ColumnRef(c)) for c in output_columns(q))
        body = q

    preds, sources = _flatten(body)
    env = {}
    from_parts = []
    for s in sources:
        if isinstance(s, Unit):
            continue
        if isinstance(s, Table):
            if not s.alias:
                raise PlanError(f"table {s.name!r} lacks an alias")
            from_parts.append(f"{_q(s.name)} AS {_q(s.alias)}")
            for c in s.cols:
                env[scoped(c, s.alias)] = f"{_q(s.alias)}.{_q(c)}"
            env[rid_col(s.alias)] = f"{_q(s.alias)}.rowid"
        else:
            _counter[0] += 1
            alias = f"_sub{_counter[0]}"
            inner = render_sql(s, _counter)
            from_parts.append(f"({inner}) AS {_q(alias)}")
            for c in output_columns(s):
                env[c] = f"{_q(alias)}.{_q(c)}"

    cols = ", ".join(f"{render_expr(e, env)} AS {_q(a)}" for a, e in targets)
    sql = f"SELECT {cols}"
    if from_parts:
        sql += " FROM " + ", ".join(from_parts)
    live = [p for p in preds if p != TRUE]
    if live:
        sql += " WHERE " + " AND ".join(render_expr(p, env) for p in live)
    return sql
