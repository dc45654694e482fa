"""Worklist symbolic execution with on-the-fly scheduling and lazy
wildcard matching.

One process is symbolically executed at a time: the scheduler keeps running
the designated next process (set when a communication blocked) or the
smallest-ranked active process, and switches only at unmatched
communication points.  From any state the expansion therefore yields the
successors of exactly one process, never the cross-product of all of them.

Wildcard receives are matched lazily.  A Recv(any) puts its process to
sleep, a send targeting a sleeping wildcard receiver also blocks, and only
when no process can run at all does the scheduler fork one successor per
(wildcard receiver, blocked sender) pair.  Matching eagerly instead is
unsound in both directions: rewriting a wildcard to a source that never
sends invents a deadlock, and committing to the first sender that shows up
hides the deadlocks the other senders lead to.

A state with no runnable process and no wildcard pair, in which some
process has not exited, is a deadlock.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple, Union

from . import lang, ops, solver, symbolic
from .solver import Model
from .state import (BranchChoice, BarrierRelease, EngineError, GlobalState,
                    StepEvent, Status, Verdict, WaitBarrier, WaitRecv,
                    WaitRecvAny, WaitSend, advance, assume, eval_expr,
                    fork, init_state, match_transfer)


class ValidationFailure(Exception):
    """Raised when search is asked to run a program that fails validation."""

    def __init__(self, findings):
        super().__init__("; ".join(f.message for f in findings))
        self.findings = findings


@dataclass
class SearchStrategy:
    order: str = "dfs"  # "dfs" | "bfs"
    max_states: Optional[int] = None
    max_depth: Optional[int] = None

    def __post_init__(self):
        if self.order not in ("dfs", "bfs"):
            raise ValueError("order must be 'dfs' or 'bfs'")
        if self.max_states is not None and self.max_states < 1:
            raise ValueError("max_states must be positive")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be positive")


@dataclass
class SolverStats:
    queries: int = 0


@dataclass(frozen=True)
class RunProc:
    rank: int
    from_candidate: bool = False


@dataclass(frozen=True)
class ForkedWildcard:
    successors: Tuple[GlobalState, ...]
    pairs: Tuple[Tuple[int, int], ...]  # (receiver, sender) per successor


@dataclass(frozen=True)
class Deadlocked:
    pass


ScheduleOutcome = Union[RunProc, ForkedWildcard, Deadlocked]


@dataclass
class PathRecord:
    index: int
    verdict: Verdict
    pc: symbolic.PathCondition
    model: Model
    trace: Tuple
    steps: int
    fail_loc: Optional[int] = None
    error: Optional[str] = None
    final_state: Optional[GlobalState] = None  # kept for differential checks


@dataclass
class AnalysisReport:
    records: List[PathRecord]
    states_created: int
    solver_queries: int
    wall_time: float
    truncated: bool = False
    nprocs: int = 0

    @property
    def counts(self) -> Dict[str, int]:
        out: Dict[str, int] = {}
        for rec in self.records:
            out[rec.verdict.value] = out.get(rec.verdict.value, 0) + 1
        return out

    def by_verdict(self, verdict: Verdict) -> List[PathRecord]:
        return [r for r in self.records if r.verdict is verdict]


# -- scheduling ---------------------------------------------------------------


def _decision(s: GlobalState):
    """Pure scheduling decision; mutation is applied by expand()."""
    cand = s.next_proc_candidate
    if cand is not None and s.procs[cand].status is Status.ACTIVE:
        return ("run", cand, True)
    active = s.ranks_with_status(Status.ACTIVE)
    if active:
        return ("run", min(active), False)
    pairs = []
    for p in s.procs:
        if isinstance(p.blocked_on, WaitRecvAny):
            for q in s.procs:
                if isinstance(q.blocked_on, WaitSend) and q.blocked_on.dest == p.rank:
                    pairs.append((p.rank, q.rank))
    if pairs:
        return ("wildcard", pairs)
    if any(p.status is Status.INACTIVE for p in s.procs):
        return ("deadlock",)
    raise EngineError("scheduler called on a terminated state")


def _wildcard_successors(s: GlobalState, pairs) -> List[GlobalState]:
    succs = []
    for receiver, sender in pairs:
        t = fork(s)
        t.depth += 1
        match_transfer(t, sender, receiver)
        succs.append(t)
    return succs


def scheduler(s: GlobalState) -> ScheduleOutcome:
    """Pick what happens next in a running state.

    Either a single process to execute, a fan-out of one successor per
    pending wildcard match (only possible once nothing is runnable), or a
    deadlock report.  The state itself is not modified.
    """
    if s.verdict is not Verdict.RUNNING:
        raise EngineError("scheduler called on a non-running state")
    d = _decision(s)
    if d[0] == "run":
        return RunProc(d[1], d[2])
    if d[0] == "wildcard":
        pairs = d[1]
        return ForkedWildcard(tuple(_wildcard_successors(s, pairs)), tuple(pairs))
    return Deadlocked()


def classify(s: GlobalState) -> Verdict:
    """Verdict of a state: Terminated when everything exited, Deadlock when
    the scheduler has nothing to do, otherwise whatever the state carries."""
    if s.verdict is not Verdict.RUNNING:
        return s.verdict
    if s.all_exited():
        return Verdict.TERMINATED
    if _decision(s)[0] == "deadlock":
        return Verdict.DEADLOCK
    return Verdict.RUNNING


# -- per-statement symbolic execution ----------------------------------------


def _sat(s: GlobalState, extra: symbolic.SymExpr, stats: Optional[SolverStats]) -> bool:
    if stats is not None:
        stats.queries += 1
    return solver.is_sat(s.pc + (extra,), s.compiled.domains)


def _resolve_rank(s: GlobalState, rank: int, e: lang.Expr,
                  stats: Optional[SolverStats]):
    """Concrete value of a destination/source expression, or an error string
    when the path condition does not pin it down."""
    v = eval_expr(s, rank, e)
    if isinstance(v, symbolic.IntConst):
        value = v.value
    else:
        if stats is not None:
            stats.queries += 1
        value = solver.check_entailed_constant(s.pc, v, s.compiled.domains)
        if value is None:
            return None, f"rank expression {symbolic.to_source(v)} is not constant under the path condition"
    if not 0 <= value < s.nprocs:
        return None, f"rank {value} out of range [0, {s.nprocs})"
    if value == rank:
        return None, f"process {rank} cannot communicate with itself"
    return value, None


def _error_terminal(s: GlobalState, p: int, loc: int, message: str) -> GlobalState:
    t = fork(s)
    t.depth += 1
    t.trace.append(StepEvent(p, loc))
    t.verdict = Verdict.ERROR
    t.error = f"L{t.compiled.line_of(loc)}: {message}"
    return t


def se_step(s: GlobalState, p: int, stats: Optional[SolverStats] = None) -> List[GlobalState]:
    """Execute exactly one statement of process p, returning 1 or 2
    successor states.  The input state is never modified."""
    proc = s.procs[p]
    if proc.status is not Status.ACTIVE:
        raise EngineError(f"se_step on non-active process {p}")
    if s.verdict is not Verdict.RUNNING:
        raise EngineError("se_step on a non-running state")
    loc = proc.pc_loc
    op = s.compiled.op_at(loc)

    def stepped() -> GlobalState:
        t = fork(s)
        t.depth += 1
        t.trace.append(StepEvent(p, loc))
        return t

    if isinstance(op, ops.OpAssign):
        t = stepped()
        t.procs[p].env[op.var] = eval_expr(t, p, op.expr)
        advance(t, (p,))
        return [t]

    if isinstance(op, ops.OpBranch):
        cond = eval_expr(s, p, op.cond)
        if isinstance(cond, symbolic.BoolConst):
            t = stepped()
            t.trace.append(BranchChoice(loc, cond.value))
            t.procs[p].pc_loc = op.true_target if cond.value else op.false_target
            _exit_if_past_end(t, p)
            return [t]
        succs = []
        for taken in (True, False):  # true side explored first under DFS
            guard = cond if taken else symbolic.negate(cond)
            if _sat(s, guard, stats):
                t = stepped()
                t.trace.append(BranchChoice(loc, taken))
                assume(t, guard)
                t.procs[p].pc_loc = op.true_target if taken else op.false_target
                _exit_if_past_end(t, p)
                succs.append(t)
        if not succs:
            raise EngineError("both branch directions unsatisfiable on a live path")
        return succs

    if isinstance(op, ops.OpSend):
        dest, err = _resolve_rank(s, p, op.dest, stats)
        if err is not None:
            return [_error_terminal(s, p, loc, err)]
        t = stepped()
        q = t.procs[dest]
        if isinstance(q.blocked_on, WaitRecv) and q.blocked_on.src == p:
            match_transfer(t, p, dest)
        else:
            # A sleeping wildcard receiver does NOT match here; the sender
            # blocks so the scheduler can later fork over all candidates.
            t.procs[p].status = Status.INACTIVE
            t.procs[p].blocked_on = WaitSend(dest, eval_expr(t, p, op.payload))
            t.next_proc_candidate = dest
        return [t]

    if isinstance(op, ops.OpRecv):
        if op.src is None:
            t = stepped()
            t.procs[p].status = Status.INACTIVE
            t.procs[p].blocked_on = WaitRecvAny(op.var)
            return [t]
        src, err = _resolve_rank(s, p, op.src, stats)
        if err is not None:
            return [_error_terminal(s, p, loc, err)]
        t = stepped()
        q = t.procs[src]
        if isinstance(q.blocked_on, WaitSend) and q.blocked_on.dest == p:
            match_transfer(t, src, p)
        else:
            t.procs[p].status = Status.INACTIVE
            t.procs[p].blocked_on = WaitRecv(src, op.var)
            t.next_proc_candidate = src
        return [t]

    if isinstance(op, ops.OpBarrier):
        t = stepped()
        proc_t = t.procs[p]
        if not t.barrier_pending:
            # Open an epoch over every rank; exited members never arrive,
            # which (correctly) wedges the barrier.
            members = set(range(t.nprocs)) - {p}
            if members:
                t.barrier_pending = members
                proc_t.status = Status.INACTIVE
                proc_t.blocked_on = WaitBarrier()
            else:
                t.trace.append(BarrierRelease(t.barrier_epochs))
                t.barrier_epochs += 1
                advance(t, (p,))
        else:
            if p not in t.barrier_pending:
                raise EngineError(f"process {p} at a barrier it is not pending on")
            t.barrier_pending.discard(p)
            if t.barrier_pending:
                proc_t.status = Status.INACTIVE
                proc_t.blocked_on = WaitBarrier()
            else:
                participants = [q.rank for q in t.procs
                                if isinstance(q.blocked_on, WaitBarrier)] + [p]
                for r in participants:
                    t.procs[r].status = Status.ACTIVE
                    t.procs[r].blocked_on = None
                t.trace.append(BarrierRelease(t.barrier_epochs))
                t.barrier_epochs += 1
                advance(t, sorted(participants))
        return [t]

    if isinstance(op, ops.OpAssert):
        cond = eval_expr(s, p, op.cond)
        if isinstance(cond, symbolic.BoolConst):
            t = stepped()
            t.trace.append(BranchChoice(loc, cond.value))
            if cond.value:
                advance(t, (p,))
            else:
                t.verdict = Verdict.ASSERT_FAIL
                t.fail_loc = loc
            return [t]
        succs = []
        if _sat(s, cond, stats):
            t = stepped()
            t.trace.append(BranchChoice(loc, True))
            assume(t, cond)
            advance(t, (p,))
            succs.append(t)
        neg = symbolic.negate(cond)
        if _sat(s, neg, stats):
            t = stepped()
            t.trace.append(BranchChoice(loc, False))
            assume(t, neg)
            t.verdict = Verdict.ASSERT_FAIL
            t.fail_loc = loc
            succs.append(t)
        if not succs:
            raise EngineError("assertion with no satisfiable direction")
        return succs

    if isinstance(op, ops.OpExit):
        t = stepped()
        t.procs[p].status = Status.EXITED
        t.procs[p].blocked_on = None
        t.procs[p].pc_loc = t.compiled.end
        return [t]

    raise EngineError(f"cannot execute {op!r}")


def _exit_if_past_end(s: GlobalState, p: int):
    if s.procs[p].pc_loc >= s.compiled.end:
        s.procs[p].status = Status.EXITED
        s.procs[p].blocked_on = None


def expand(s: GlobalState, stats: Optional[SolverStats] = None) -> List[GlobalState]:
    """One exploration step: schedule, then execute.  Successors are in
    exploration-priority order (the first element is explored first under
    DFS)."""
    outcome = scheduler(s)
    if isinstance(outcome, RunProc):
        if outcome.from_candidate:
            s.next_proc_candidate = None
        return se_step(s, outcome.rank, stats)
    if isinstance(outcome, ForkedWildcard):
        return list(outcome.successors)
    s.verdict = Verdict.DEADLOCK
    s.depth += 1
    return [s]


# -- the search loop ----------------------------------------------------------


def search(program: lang.Program, nprocs: int,
           strategy: Optional[SearchStrategy] = None,
           pin_model: Optional[Model] = None) -> AnalysisReport:
    """Explore every path of the program under `nprocs` processes.

    Each terminal state becomes one PathRecord carrying a witness model for
    its path condition.  `pin_model` constrains every symbolic input to a
    fixed value (used by the differential theorem check and the CLI's
    --set); the search is then over match non-determinism only.
    """
    strategy = strategy or SearchStrategy()
    findings = lang.validate(program, nprocs)
    if findings:
        raise ValidationFailure(findings)
    compiled = ops.lower(program)
    domains = compiled.domains
    s0 = init_state(program, nprocs, compiled)
    if pin_model is not None:
        for name, (lo, hi) in domains.items():
            if name not in pin_model:
                raise EngineError(f"pinned model does not assign {name!r}")
            v = pin_model[name]
            if not lo <= v <= hi:
                raise EngineError(f"pinned value {name}={v} outside [{lo}, {hi}]")
            assume(s0, symbolic.BinaryOp("==", symbolic.SymRef(name),
                                         symbolic.IntConst(v)))

    stats = SolverStats()
    t_start = time.perf_counter()
    records: List[PathRecord] = []
    states_created = 1
    truncated = False

    if strategy.order == "dfs":
        worklist = [s0]
        pop = worklist.pop
    else:
        worklist = deque([s0])
        pop = worklist.popleft

    while worklist:
        s = pop()
        verdict = classify(s)
        if verdict is not Verdict.RUNNING:
            s.verdict = verdict
            stats.queries += 1
            model = solver.get_model(s.pc, domains)
            records.append(PathRecord(
                index=len(records), verdict=verdict, pc=s.pc, model=model,
                trace=tuple(s.trace), steps=s.depth, fail_loc=s.fail_loc,
                error=s.error, final_state=s))
            continue
        if strategy.max_depth is not None and s.depth >= strategy.max_depth:
            truncated = True
            continue
        if strategy.max_states is not None and states_created >= strategy.max_states:
            truncated = True
            continue
        succs = expand(s, stats)
        states_created += len(succs)
        if strategy.order == "dfs":
            worklist.extend(reversed(succs))
        else:
            worklist.extend(succs)

    return AnalysisReport(records=records, states_created=states_created,
                          solver_queries=stats.queries,
                          wall_time=time.perf_counter() - t_start,
                          truncated=truncated, nprocs=nprocs)
