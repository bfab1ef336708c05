"""Lens models: discrete distributions over repair choices, trained from the
lens source data, with deterministic world sampling.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .algebra import OperatorTree, Project
from .expr import (ColumnRef, Comparison, Conditional, Constant, IsNull,
                   RowIdRef, VarInstance, VarTerm)
from .values import canonical_key

DOMAIN_REPAIR = "DOMAIN_REPAIR"
SCHEMA_MATCHING = "SCHEMA_MATCHING"

NO_MATCH = None  # explicit no-candidate outcome for schema matching


class LensError(Exception):
    pass


@dataclass(frozen=True)
class DiscreteDistribution:
    support: tuple  # of (value, probability)

    def __post_init__(self):
        total = 0.0
        for v, p in self.support:
            if p <= 0:
                raise LensError(f"non-positive probability {p} for {v!r}")
            total += p
        if abs(total - 1.0) > 1e-9:
            raise LensError(f"probabilities sum to {total}, not 1")

    def best_guess(self):
        # Ties break toward the canonically smallest value so repeated
        # training runs agree.
        return max(self.support,
                   key=lambda vp: (vp[1], _neg_key(vp[0])))[0]

    def sample(self, u):
        acc = 0.0
        for v, p in self.support:
            acc += p
            if u < acc:
                return v
        return self.support[-1][0]

    def prob(self, value):
        for v, p in self.support:
            if v == value:
                return p
        return 0.0

    def values(self):
        return [v for v, _ in self.support]


class _NegKey:
    # Inverts canonical order so max() prefers the smaller value on ties.
    __slots__ = ("k",)

    def __init__(self, v):
        self.k = canonical_key(v)

    def __lt__(self, other):
        return self.k > other.k

    def __eq__(self, other):
        return self.k == other.k


def _neg_key(v):
    return _NegKey(v)


def hash_unit(*parts):
    """Deterministic map of arbitrary parts to [0, 1)."""
    raw = json.dumps(parts, default=str, sort_keys=True).encode()
    h = hashlib.blake2b(raw, digest_size=8).digest()
    return int.from_bytes(h, "big") / 2.0 ** 64


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------

class Model:
    """Per-variable distribution family with deterministic sampling."""

    lens: str
    var: str

    def distribution(self, inst: VarInstance) -> DiscreteDistribution:
        raise NotImplementedError

    def instances(self):
        """All VarInstances this model was trained on (enumerable support)."""
        raise NotImplementedError

    def get_best_guess(self, inst):
        return self.distribution(inst).best_guess()

    def get_sample(self, inst, world_id):
        u = hash_unit(self.lens, inst.name, list(inst.args), world_id)
        return self.distribution(inst).sample(u)

    def get_reason(self, inst):
        raise NotImplementedError

    def bounds(self, inst):
        vals = self.distribution(inst).values()
        if vals and all(isinstance(v, (int, float)) and
                        not isinstance(v, bool) for v in vals):
            return (min(vals), max(vals))
        return None


@dataclass
class DomainRepairModel(Model):
    lens: str
    var: str  # the repaired column
    per_key: dict  # instance key (stringified rowid) -> DiscreteDistribution
    marginal: DiscreteDistribution

    def distribution(self, inst):
        key = inst.args[0] if inst.args else ""
        return self.per_key.get(key, self.marginal)

    def instances(self):
        return [VarInstance(self.lens, self.var, (k,))
                for k in sorted(self.per_key)]

    def get_reason(self, inst):
        key = inst.args[0] if inst.args else "?"
        guess = self.get_best_guess(inst)
        return (f"lens '{self.lens}' repaired the missing value of "
                f"'{self.var}' on row {key} with the guess {guess!r}")

    def to_json(self):
        return {"kind": DOMAIN_REPAIR, "lens": self.lens, "var": self.var,
                "per_key": {k: list(d.support) for k, d in self.per_key.items()},
                "marginal": list(self.marginal.support)}


@dataclass
class SchemaMatchingModel(Model):
    lens: str
    var: str  # the target column being matched
    dist: DiscreteDistribution  # over source column names (or NO_MATCH)

    def distribution(self, inst):
        return self.dist

    def instances(self):
        return [VarInstance(self.lens, self.var, ())]

    def get_reason(self, inst):
        guess = self.get_best_guess(inst)
        if guess is NO_MATCH:
            return (f"lens '{self.lens}' found no usable source column for "
                    f"target column '{self.var}'")
        return (f"lens '{self.lens}' matched target column '{self.var}' to "
                f"source column '{guess}' by name similarity")

    def bounds(self, inst):
        return None

    def to_json(self):
        return {"kind": SCHEMA_MATCHING, "lens": self.lens, "var": self.var,
                "dist": list(self.dist.support)}


def model_from_json(data):
    kind = data["kind"]
    if kind == DOMAIN_REPAIR:
        return DomainRepairModel(
            data["lens"], data["var"],
            {k: DiscreteDistribution(tuple(map(tuple, s)))
             for k, s in data["per_key"].items()},
            DiscreteDistribution(tuple(map(tuple, data["marginal"]))))
    if kind == SCHEMA_MATCHING:
        return SchemaMatchingModel(
            data["lens"], data["var"],
            DiscreteDistribution(tuple(map(tuple, data["dist"]))))
    raise LensError(f"unknown model kind {kind!r}")


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def _freq_distribution(vals):
    counts = {}
    for v in vals:
        counts[v] = counts.get(v, 0) + 1
    total = sum(counts.values())
    support = tuple(sorted(((v, c / total) for v, c in counts.items()),
                           key=lambda vp: canonical_key(vp[0])))
    return DiscreteDistribution(support)


MAX_PEER_CARDINALITY = 8


def train_domain_repair(column, source_rows, lens="", key_field="__rowid__"):
    """Frequency classifier for a nullable column.

    Rows whose value is missing get a per-row distribution conditioned on
    low-cardinality peer columns when any peer context matches, otherwise the
    column's marginal frequencies.
    """
    observed = [r[column] for r in source_rows if r.get(column) is not None]
    if not observed:
        raise LensError(f"column '{column}' has no non-null training values")
    marginal = _freq_distribution(observed)

    other = [c for c in (source_rows[0].keys() if source_rows else [])
             if c not in (column, key_field)]
    peers = []
    for c in other:
        vals = {r[c] for r in source_rows if r.get(c) is not None}
        if 2 <= len(vals) <= MAX_PEER_CARDINALITY:
            peers.append(c)

    per_key = {}
    for r in source_rows:
        if r.get(column) is not None:
            continue
        key = str(r[key_field])
        ctx = {c: r[c] for c in peers if r.get(c) is not None}
        pool = [s[column] for s in source_rows
                if s.get(column) is not None
                and all(s.get(c) == v for c, v in ctx.items())]
        per_key[key] = _freq_distribution(pool) if pool else marginal
    return DomainRepairModel(lens, column, per_key, marginal)


def _lcs_len(a, b):
    prev = [0] * (len(b) + 1)
    for ch in a:
        cur = [0]
        for j, dh in enumerate(b, 1):
            cur.append(prev[j - 1] + 1 if ch == dh else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def name_similarity(a, b):
    a, b = a.casefold(), b.casefold()
    if not a or not b:
        return 0.0
    return 2.0 * _lcs_len(a, b) / (len(a) + len(b))


_NUMERIC_TYPES = {"int", "integer", "bigint", "real", "float", "double",
                  "decimal", "number", "numeric"}


def type_class(t):
    return "numeric" if t.casefold() in _NUMERIC_TYPES else "text"


def train_schema_matching(source_schema, target_schema, lens=""):
    """One model per target column: distribution over type-compatible source
    columns weighted by name similarity."""
    if not source_schema or not target_schema:
        raise LensError("schema matching needs non-empty schemas")
    models = {}
    for tname, ttype in target_schema:
        cands = [(sname, name_similarity(sname, tname))
                 for sname, stype in source_schema
                 if type_class(stype) == type_class(ttype)]
        weights = [(n, w) for n, w in cands if w > 0]
        if not weights and cands:
            weights = [(n, 1.0) for n, _ in cands]
        if not weights:
            dist = DiscreteDistribution(((NO_MATCH, 1.0),))
        else:
            total = sum(w for _, w in weights)
            support = tuple(sorted(((n, w / total) for n, w in weights),
                                   key=lambda vp: canonical_key(vp[0])))
            dist = DiscreteDistribution(support)
        models[tname] = SchemaMatchingModel(lens, tname, dist)
    return models


# ---------------------------------------------------------------------------
# Lens bodies
# ---------------------------------------------------------------------------

@dataclass
class LensDefinition:
    name: str
    kind: str
    source_query: OperatorTree
    params: tuple  # of (name, type, modifiers)
    body: OperatorTree
    models: dict = field(default_factory=dict)  # var name -> Model
    model_id: str = ""


def build_domain_repair_body(lens_name, source_query, source_cols, repair_cols):
    targets = []
    for c in source_cols:
        if c in repair_cols:
            e = Conditional(IsNull(ColumnRef(c)),
                            VarTerm(lens_name, c, (RowIdRef(),)),
                            ColumnRef(c))
        else:
            e = ColumnRef(c)
        targets.append((c, e))
    return Project(tuple(targets), source_query)


def build_schema_matching_body(lens_name, source_query, models, target_schema):
    """Each target column picks its source column via the match variable:
    a conditional chain over the candidate source columns."""
    targets = []
    for tname, _ in target_schema:
        dist = models[tname].dist
        cands = [v for v in dist.values() if v is not NO_MATCH]
        if len(cands) == 1 and dist.prob(cands[0]) == 1.0:
            # a single certain candidate needs no match variable
            targets.append((tname, ColumnRef(cands[0])))
            continue
        e = Constant(None)
        for cand in reversed(cands):
            e = Conditional(
                Comparison("=", VarTerm(lens_name, tname, ()), Constant(cand)),
                ColumnRef(cand), e)
        targets.append((tname, e))
    return Project(tuple(targets), source_query)


# ---------------------------------------------------------------------------
# World sampling
# ---------------------------------------------------------------------------

def sample_world(models, world_id):
    """Total resolver for one possible world; models keyed by (lens, var)."""
    if world_id < 0:
        raise LensError("world_id must be non-negative")

    def resolve(inst):
        m = models.get((inst.lens, inst.name))
        if m is None:
            raise LensError(f"no model for {inst}")
        return m.get_sample(inst, world_id)

    return resolve


def best_guess_resolver(models):
    def resolve(inst):
        m = models.get((inst.lens, inst.name))
        if m is None:
            raise LensError(f"no model for {inst}")
        return m.get_best_guess(inst)

    return resolve
