"""Condition partitioning: carve row space into regions of uniform
determinism so whole regions can be answered by pure backend queries.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

from . import values as V
from .algebra import Select
from .expr import (And, BoolConst, BoolExpr, Comparison, Conditional, FALSE,
                   IsFalse, IsNull, IsTrue, Not, Or, TRUE, apply_binding,
                   conjoin, contains_var, disjoin, is_det, simplify, walk,
                   _null_proof)

DEFAULT_CLAUSE_CAP = 6  # 2^6 = 64 partitions at most


def _det(e):
    return simplify(is_det(e)) == TRUE


def candidate_clauses(phi):
    """Deterministic guards of conditionals that gate a Var-containing branch.

    Fixing the truth of each guard collapses the conditional, so a conjunction
    of guard literals can turn phi into a deterministic residual.
    """
    seen, out = set(), []
    for n in walk(phi):
        if not isinstance(n, Conditional):
            continue
        if contains_var(n.then) == contains_var(n.otherwise):
            continue
        c = simplify(n.cond)
        if not _det(c):
            continue
        if not _null_proof(c):
            # A guard that can be unknown would leave rows outside both the
            # positive and the negated region; strict truth splits cleanly.
            c = IsTrue(c)
        if c in seen:
            continue
        seen.add(c)
        out.append(c)
    return out


@dataclass(frozen=True)
class Partition:
    guard: BoolExpr     # Var-free region selector, pushed to the backend
    det_cond: BoolExpr  # deterministic residual conjuncts, also pushed down
    var_cond: BoolExpr  # what remains of phi for rows of this region

    @property
    def deterministic(self):
        return not contains_var(self.var_cond)


@dataclass(frozen=True)
class PartitionSet:
    partitions: tuple

    def __iter__(self):
        return iter(self.partitions)

    def __len__(self):
        return len(self.partitions)


def _split_residual(bound):
    """Segment a bound condition into pushable and residual conjuncts."""
    from .normalize import segment_condition
    return segment_condition(bound)


def naive_partition(phi, cap=DEFAULT_CLAUSE_CAP):
    """One partition per truth assignment of the candidate clauses.

    Past the clause cap the 2^k blowup is not worth it; fall back to a
    two-way split on the row-level determinism formula.
    """
    phi = simplify(phi)
    clauses = candidate_clauses(phi)
    if len(clauses) > cap:
        d = simplify(is_det(phi))
        return PartitionSet((Partition(d, TRUE, phi),
                             Partition(simplify(Not(d)), TRUE, phi)))
    parts = []
    for mask in range(1 << len(clauses)):
        lits = [c if (mask >> i) & 1 else Not(c)
                for i, c in enumerate(clauses)]
        psi = conjoin(lits)
        bound = apply_binding(phi, psi)
        # regions where phi collapses to FALSE stay in the set (the guards
        # must tile the row space); their pushed-down condition selects
        # nothing, so they cost no backend work
        det, var = _split_residual(bound)
        parts.append(Partition(psi, det, var))
    return PartitionSet(tuple(parts))


@dataclass(frozen=True)
class GeneralPartition:
    psi_true: BoolExpr   # rows where phi holds deterministically
    psi_false: BoolExpr  # rows where phi fails deterministically
    var: tuple           # of Partition, the residual non-deterministic regions


def general_partition(phi):
    """Recursive partitioner exploiting the and/or structure of phi.

    A conjunction fails as soon as either side fails, so its false region is
    a disjunction of the sides' false regions; dually for disjunction.
    """
    phi = simplify(phi)
    if not contains_var(phi):
        # Unknown filters out, so it lands in the false region.
        t = simplify(IsTrue(phi))
        return GeneralPartition(t, simplify(Not(t)), ())

    if isinstance(phi, Not) and isinstance(phi.child, (And, Or)):
        # Push the negation inward so the and/or cases below see it.  A bare
        # region swap would misplace rows where the child is unknown (the row
        # is then filtered out either way).
        c = phi.child
        flipped = Or if isinstance(c, And) else And
        return general_partition(flipped(Not(c.lhs), Not(c.rhs)))

    if isinstance(phi, (And, Or)):
        l = general_partition(phi.lhs)
        r = general_partition(phi.rhs)
        # "absorb" is the per-side region that decides the whole formula
        # (false for And, true for Or); "neutral" leaves the other side in
        # charge.
        if isinstance(phi, And):
            labs, rabs, lneu, rneu = l.psi_false, r.psi_false, l.psi_true, r.psi_true
        else:
            labs, rabs, lneu, rneu = l.psi_true, r.psi_true, l.psi_false, r.psi_false
        decided = simplify(Or(labs, rabs))
        undecided = simplify(And(lneu, rneu))
        var = []

        def add(guard, det_l, det_r, cond):
            g = simplify(guard)
            if g == FALSE:
                return
            det = simplify(And(det_l, det_r))
            var.append(Partition(g, det, simplify(cond)))

        for pl in l.var:
            add(And(pl.guard, rneu), pl.det_cond, TRUE, pl.var_cond)
        for pr in r.var:
            add(And(lneu, pr.guard), TRUE, pr.det_cond, pr.var_cond)
        for pl in l.var:
            for pr in r.var:
                if isinstance(phi, And):
                    # Both sides must hold; their pushable parts stay pushable.
                    add(And(pl.guard, pr.guard), pl.det_cond, pr.det_cond,
                        And(pl.var_cond, pr.var_cond))
                else:
                    # Either side may satisfy the disjunction, so neither
                    # side's deterministic conjuncts may be pushed down.
                    add(And(pl.guard, pr.guard), TRUE, TRUE,
                        Or(And(pl.det_cond, pl.var_cond),
                           And(pr.det_cond, pr.var_cond)))
        if isinstance(phi, And):
            return GeneralPartition(undecided, decided, tuple(var))
        return GeneralPartition(decided, undecided, tuple(var))

    # Leaf: no useful boolean structure, fall back to clause enumeration.
    trues, falses, var = [], [], []
    for p in naive_partition(phi):
        bound = simplify(And(p.det_cond, p.var_cond))
        if bound == TRUE:
            trues.append(p.guard)
        elif bound == FALSE:
            falses.append(p.guard)
        elif p.deterministic:
            t = simplify(IsTrue(bound))
            trues.append(simplify(And(p.guard, t)))
            falses.append(simplify(And(p.guard, Not(t))))
        else:
            var.append(p)
    return GeneralPartition(simplify(disjoin(trues)),
                            simplify(disjoin(falses)),
                            tuple(var))


def partition_query(nf, ps):
    """Emit one restricted sub-query per partition; their bag union equals
    the original query in every possible world."""
    from .normalize import NormalForm
    out = []
    for p in ps:
        pushed = simplify(And(p.guard, p.det_cond))
        dq = nf.det_query if pushed == TRUE else Select(pushed, nf.det_query)
        out.append(NormalForm(nf.targets, p.var_cond, dq))
    return out


# ---------------------------------------------------------------------------
# Completeness / disjointness checking (used by tests and guard pruning)
# ---------------------------------------------------------------------------

def _atoms(e):
    out = []
    for n in walk(e):
        if isinstance(n, (Comparison, IsNull)) or (
                isinstance(n, IsTrue) and not isinstance(n.child, (And, Or, Not, BoolConst, IsTrue, IsFalse, IsNull))):
            if n not in out:
                out.append(n)
    return out


def _eval_guard(e, asg):
    if e in asg:
        return asg[e]
    if isinstance(e, BoolConst):
        return e.value
    if isinstance(e, And):
        return V.and3(_eval_guard(e.lhs, asg), _eval_guard(e.rhs, asg))
    if isinstance(e, Or):
        return V.or3(_eval_guard(e.lhs, asg), _eval_guard(e.rhs, asg))
    if isinstance(e, Not):
        return V.not3(_eval_guard(e.child, asg))
    if isinstance(e, IsTrue):
        return _eval_guard(e.child, asg) is True
    if isinstance(e, IsFalse):
        return _eval_guard(e.child, asg) is False
    raise ValueError(f"guard atom not assigned: {e!r}")


def check_partition_set(guards, max_atoms=10):
    """Verify by truth-assignment enumeration that the guards cover every row
    exactly once.  Atom interactions (e.g. x=1 vs x=2) are ignored, which can
    only make the check stricter, never unsound."""
    atoms = []
    for g in guards:
        for a in _atoms(g):
            if a not in atoms:
                atoms.append(a)
    if len(atoms) > max_atoms:
        raise ValueError(f"too many atoms to enumerate: {len(atoms)}")
    domains = [(True, False) if _null_proof(a) else (True, False, None)
               for a in atoms]
    for combo in product(*domains):
        asg = dict(zip(atoms, combo))
        hits = sum(1 for g in guards if _eval_guard(g, asg) is True)
        if hits != 1:
            return False
    return True
