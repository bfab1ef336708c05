"""Operator trees: positive bag relational algebra over tables and lenses."""
from __future__ import annotations

from dataclasses import dataclass

from .expr import BoolExpr, ColumnRef, NumExpr


class PlanError(Exception):
    """Raised for malformed or unsupported operator trees."""


@dataclass(frozen=True)
class OperatorTree:
    pass


@dataclass(frozen=True)
class Table(OperatorTree):
    name: str
    alias: str = ""
    cols: tuple = ()  # base column names; filled in during lens expansion


@dataclass(frozen=True)
class Unit(OperatorTree):
    """Single-row, zero-column relation (SELECT without FROM)."""


@dataclass(frozen=True)
class LensRef(OperatorTree):
    name: str


@dataclass(frozen=True)
class Project(OperatorTree):
    targets: tuple  # of (attr, NumExpr)
    src: OperatorTree

    def __post_init__(self):
        names = [a for a, _ in self.targets]
        if len(set(names)) != len(names):
            raise PlanError(f"duplicate projection attributes: {names}")


@dataclass(frozen=True)
class Select(OperatorTree):
    pred: BoolExpr
    src: OperatorTree


@dataclass(frozen=True)
class Cross(OperatorTree):
    lhs: OperatorTree
    rhs: OperatorTree


@dataclass(frozen=True)
class Union(OperatorTree):
    lhs: OperatorTree
    rhs: OperatorTree
    src_col: str = ""  # discriminator column, set by the normalizer


def rid_col(alias):
    return f"_rid_{alias}"


def scoped(col, alias):
    return f"{col}@{alias}"


def tree_children(t):
    if isinstance(t, (Project, Select)):
        return (t.src,)
    if isinstance(t, (Cross, Union)):
        return (t.lhs, t.rhs)
    return ()


def tree_walk(t):
    yield t
    for c in tree_children(t):
        yield from tree_walk(c)


def output_columns(t):
    """Output attribute names of a deterministic (lens-free) tree."""
    if isinstance(t, Table):
        if not t.alias:
            raise PlanError(f"table {t.name!r} was not expanded")
        return [scoped(c, t.alias) for c in t.cols] + [rid_col(t.alias)]
    if isinstance(t, Unit):
        return []
    if isinstance(t, Project):
        return [a for a, _ in t.targets]
    if isinstance(t, Select):
        return output_columns(t.src)
    if isinstance(t, Cross):
        return output_columns(t.lhs) + output_columns(t.rhs)
    if isinstance(t, Union):
        return output_columns(t.lhs)
    raise PlanError(f"no static schema for {type(t).__name__}")


def expressions_of(t):
    """All expressions appearing anywhere in the tree."""
    for node in tree_walk(t):
        if isinstance(node, Project):
            for _, e in node.targets:
                yield e
        elif isinstance(node, Select):
            yield node.pred
