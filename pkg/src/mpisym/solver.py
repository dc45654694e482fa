"""Satisfiability of path conditions over bounded integer domains.

Each symbolic input ranges over a declared inclusive interval.  Deciding a
path condition runs in two stages: an interval pre-pass evaluates every
conjunct over the input intervals, discarding trivially-true conjuncts and
refuting trivially-false ones, then a backtracking enumeration assigns the
remaining inputs in declaration order, checking each conjunct as soon as
its variables are bound.  Because assignments are enumerated ascending,
the first model found is the lexicographically smallest one, which keeps
generated test cases and golden files stable.

Arithmetic is exact (Python integers); only the declared domains are
bounded, so no overflow behavior exists to model.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Tuple

from . import lang, symbolic
from .symbolic import (BinaryOp, BoolConst, IntConst, PathCondition, SymExpr,
                       SymRef, UnaryOp)

Domains = Dict[str, Tuple[int, int]]  # declaration-ordered
Model = Dict[str, int]


class SolverError(Exception):
    pass


def domains_of(program: lang.Program) -> Domains:
    out: Domains = {}
    for d in program.decls:
        if d.lo > d.hi:
            raise SolverError(f"empty domain for {d.name!r}")
        if d.hi - d.lo + 1 > lang.MAX_DOMAIN_WIDTH:
            raise SolverError(f"domain of {d.name!r} wider than {lang.MAX_DOMAIN_WIDTH}")
        out[d.name] = (d.lo, d.hi)
    return out


def _check_declared(pc: PathCondition, domains: Domains):
    for c in pc:
        for name in symbolic.free_syms(c):
            if name not in domains:
                raise SolverError(f"undeclared symbolic input {name!r}")


def _flatten(pc: PathCondition) -> List[SymExpr]:
    """Split top-level conjunctions so each conjunct is bucketed separately."""
    out: List[SymExpr] = []
    stack = list(pc)
    while stack:
        c = stack.pop()
        if isinstance(c, BinaryOp) and c.op == "&&":
            stack.append(c.left)
            stack.append(c.right)
        else:
            out.append(c)
    out.reverse()
    return out


# -- interval pre-pass -------------------------------------------------------


def _interval(e: SymExpr, domains: Domains) -> Tuple[int, int]:
    if isinstance(e, IntConst):
        return (e.value, e.value)
    if isinstance(e, SymRef):
        return domains[e.name]
    if isinstance(e, UnaryOp) and e.op == "-":
        lo, hi = _interval(e.operand, domains)
        return (-hi, -lo)
    if isinstance(e, BinaryOp):
        a1, b1 = _interval(e.left, domains)
        a2, b2 = _interval(e.right, domains)
        if e.op == "+":
            return (a1 + a2, b1 + b2)
        if e.op == "-":
            return (a1 - b2, b1 - a2)
        if e.op == "*":
            corners = (a1 * a2, a1 * b2, b1 * a2, b1 * b2)
            return (min(corners), max(corners))
    raise SolverError(f"not an integer expression: {e!r}")


def _tribool(e: SymExpr, domains: Domains) -> Optional[bool]:
    """Definite truth value over the whole domain box, or None if mixed."""
    if isinstance(e, BoolConst):
        return e.value
    if isinstance(e, UnaryOp) and e.op == "!":
        v = _tribool(e.operand, domains)
        return None if v is None else not v
    if isinstance(e, BinaryOp):
        if e.op == "&&":
            a = _tribool(e.left, domains)
            b = _tribool(e.right, domains)
            if a is False or b is False:
                return False
            if a is True and b is True:
                return True
            return None
        if e.op == "||":
            a = _tribool(e.left, domains)
            b = _tribool(e.right, domains)
            if a is True or b is True:
                return True
            if a is False and b is False:
                return False
            return None
        lo1, hi1 = _interval(e.left, domains)
        lo2, hi2 = _interval(e.right, domains)
        if e.op == "==":
            if lo1 == hi1 == lo2 == hi2:
                return True
            if hi1 < lo2 or hi2 < lo1:
                return False
            return None
        if e.op == "!=":
            if lo1 == hi1 == lo2 == hi2:
                return False
            if hi1 < lo2 or hi2 < lo1:
                return True
            return None
        if e.op == "<":
            if hi1 < lo2:
                return True
            if lo1 >= hi2:
                return False
            return None
        if e.op == "<=":
            if hi1 <= lo2:
                return True
            if lo1 > hi2:
                return False
            return None
        if e.op == ">":
            if lo1 > hi2:
                return True
            if hi1 <= lo2:
                return False
            return None
        if e.op == ">=":
            if lo1 >= hi2:
                return True
            if hi1 < lo2:
                return False
            return None
    raise SolverError(f"not a boolean expression: {e!r}")


# -- backtracking enumeration -------------------------------------------------


def _solve(pc: PathCondition, domains: Domains) -> Optional[Model]:
    _check_declared(pc, domains)
    conjuncts = []
    for c in _flatten(pc):
        v = _tribool(c, domains)
        if v is False:
            return None
        if v is None:
            conjuncts.append(c)
    order = list(domains)
    index = {name: i for i, name in enumerate(order)}
    buckets: List[List[SymExpr]] = [[] for _ in order]
    for c in conjuncts:
        syms = symbolic.free_syms(c)
        buckets[max(index[n] for n in syms)].append(c)

    assignment: Model = {}

    def descend(i: int) -> bool:
        if i == len(order):
            return True
        lo, hi = domains[order[i]]
        for v in range(lo, hi + 1):
            assignment[order[i]] = v
            if all(symbolic.evaluate(c, assignment) for c in buckets[i]):
                if descend(i + 1):
                    return True
        del assignment[order[i]]
        return False

    if descend(0):
        return {name: assignment[name] for name in order}
    return None


def is_sat(pc: PathCondition, domains: Domains) -> bool:
    """True iff some assignment within the declared domains satisfies every
    conjunct.  Deterministic."""
    return _solve(pc, domains) is not None


def get_model(pc: PathCondition, domains: Domains) -> Model:
    """The lexicographically smallest satisfying assignment under
    declaration order; every declared input is assigned."""
    m = _solve(pc, domains)
    if m is None:
        raise SolverError("get_model called on an unsatisfiable path condition")
    return m


def check_entailed_constant(pc: PathCondition, e: SymExpr,
                            domains: Domains) -> Optional[int]:
    """Return v when every model of pc gives `e` the value v, else None."""
    if symbolic.sort_of(e) != "int":
        raise SolverError("entailment check needs an integer-sorted expression")
    if isinstance(e, IntConst):
        return e.value
    for name in symbolic.free_syms(e):
        if name not in domains:
            raise SolverError(f"undeclared symbolic input {name!r}")
    m = _solve(pc, domains)
    if m is None:
        raise SolverError("entailment check on an unsatisfiable path condition")
    v = symbolic.evaluate(e, m)
    if _solve(pc + (BinaryOp("!=", e, IntConst(v)),), domains) is None:
        return v
    return None


def enumerate_models(pc: PathCondition, domains: Domains, limit: int) -> List[Model]:
    """Up to `limit` satisfying assignments in ascending lexicographic order."""
    _check_declared(pc, domains)
    if limit <= 0:
        return []
    conjuncts = []
    for c in _flatten(pc):
        v = _tribool(c, domains)
        if v is False:
            return []
        if v is None:
            conjuncts.append(c)
    order = list(domains)
    index = {name: i for i, name in enumerate(order)}
    buckets: List[List[SymExpr]] = [[] for _ in order]
    for c in conjuncts:
        syms = symbolic.free_syms(c)
        buckets[max(index[n] for n in syms)].append(c)

    found: List[Model] = []
    assignment: Model = {}

    def descend(i: int) -> bool:
        if i == len(order):
            found.append({name: assignment[name] for name in order})
            return len(found) >= limit
        lo, hi = domains[order[i]]
        for v in range(lo, hi + 1):
            assignment[order[i]] = v
            if all(symbolic.evaluate(c, assignment) for c in buckets[i]):
                if descend(i + 1):
                    return True
        del assignment[order[i]]
        return False

    if not order:
        return [{}] if all(symbolic.evaluate(c, {}) for c in conjuncts) else []
    descend(0)
    return found
