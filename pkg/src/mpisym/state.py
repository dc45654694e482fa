"""Per-process and global execution state for the symbolic engine.

A GlobalState is a self-contained value: forking yields a fully independent
copy, so worklist items can be explored (or even moved between threads)
without sharing mutable structure.  The compiled program is immutable and
shared by every fork.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Set, Tuple

from . import lang, ops, symbolic
from .symbolic import SymExpr


class EngineError(Exception):
    """Internal invariant violation; indicates a bug, not a program verdict."""


class Status(enum.Enum):
    ACTIVE = "active"
    INACTIVE = "inactive"
    EXITED = "exited"


class Verdict(enum.Enum):
    RUNNING = "running"
    TERMINATED = "terminated"
    DEADLOCK = "deadlock"
    ASSERT_FAIL = "assertfail"
    ERROR = "error"


# Reasons a process is asleep; stored only while status == INACTIVE.


@dataclass(frozen=True)
class WaitSend:
    dest: int
    payload: SymExpr  # evaluated when the send was issued


@dataclass(frozen=True)
class WaitRecv:
    src: int
    var: str


@dataclass(frozen=True)
class WaitRecvAny:
    var: str


@dataclass(frozen=True)
class WaitBarrier:
    pass


# Schedule trace events.  Replay consumes these in order, so the engine
# must append them in a fixed discipline: a StepEvent precedes any
# BranchChoice/MatchEvent/BarrierRelease it causes; wildcard matches are
# standalone MatchEvents with wildcard=True.


@dataclass(frozen=True)
class StepEvent:
    rank: int
    loc: int


@dataclass(frozen=True)
class MatchEvent:
    sender: int
    receiver: int
    wildcard: bool


@dataclass(frozen=True)
class BarrierRelease:
    epoch: int


@dataclass(frozen=True)
class BranchChoice:
    loc: int
    taken: bool


TraceEvent = object
ScheduleTrace = Tuple[TraceEvent, ...]


class ProcState:
    __slots__ = ("rank", "pc_loc", "env", "status", "blocked_on")

    def __init__(self, rank: int, pc_loc: int):
        self.rank = rank
        self.pc_loc = pc_loc
        self.env: Dict[str, SymExpr] = {}
        self.status = Status.ACTIVE
        self.blocked_on = None

    def copy(self) -> "ProcState":
        other = ProcState.__new__(ProcState)
        other.rank = self.rank
        other.pc_loc = self.pc_loc
        other.env = dict(self.env)
        other.status = self.status
        other.blocked_on = self.blocked_on
        return other

    def snapshot(self):
        return (self.rank, self.pc_loc, tuple(sorted(self.env.items(), key=lambda kv: kv[0])),
                self.status, self.blocked_on)


class GlobalState:
    __slots__ = ("compiled", "nprocs", "procs", "pc", "next_proc_candidate",
                 "barrier_pending", "barrier_epochs", "trace", "verdict",
                 "fail_loc", "error", "depth")

    def __init__(self, compiled: ops.CompiledProgram, nprocs: int):
        self.compiled = compiled
        self.nprocs = nprocs
        start = ops.entry_point(compiled)
        self.procs: List[ProcState] = [ProcState(r, start) for r in range(nprocs)]
        for p in self.procs:
            if p.pc_loc >= compiled.end:
                p.status = Status.EXITED
        self.pc: symbolic.PathCondition = ()
        self.next_proc_candidate: Optional[int] = None
        self.barrier_pending: Set[int] = set()
        self.barrier_epochs = 0
        self.trace: List[TraceEvent] = []
        self.verdict = Verdict.RUNNING
        self.fail_loc: Optional[int] = None
        self.error: Optional[str] = None
        self.depth = 0

    # -- structure ---------------------------------------------------------

    def ranks_with_status(self, status: Status) -> List[int]:
        return [p.rank for p in self.procs if p.status is status]

    def all_exited(self) -> bool:
        return all(p.status is Status.EXITED for p in self.procs)

    def snapshot(self):
        """Structural fingerprint used by tests to detect cross-fork leaks."""
        return (tuple(p.snapshot() for p in self.procs), self.pc,
                self.next_proc_candidate, frozenset(self.barrier_pending),
                self.barrier_epochs, tuple(self.trace), self.verdict,
                self.fail_loc, self.error)


def init_state(program: lang.Program, nprocs: int,
               compiled: Optional[ops.CompiledProgram] = None) -> GlobalState:
    """Initial state: every process active at the first statement, empty
    path condition and trace."""
    if nprocs < 1:
        raise EngineError("nprocs must be positive")
    return GlobalState(compiled if compiled is not None else ops.lower(program), nprocs)


def fork(s: GlobalState) -> GlobalState:
    """Independent copy; mutating either state never affects the other."""
    t = GlobalState.__new__(GlobalState)
    t.compiled = s.compiled
    t.nprocs = s.nprocs
    t.procs = [p.copy() for p in s.procs]
    t.pc = s.pc
    t.next_proc_candidate = s.next_proc_candidate
    t.barrier_pending = set(s.barrier_pending)
    t.barrier_epochs = s.barrier_epochs
    t.trace = list(s.trace)
    t.verdict = s.verdict
    t.fail_loc = s.fail_loc
    t.error = s.error
    t.depth = s.depth
    return t


def eval_expr(s: GlobalState, rank: int, e: lang.Expr) -> SymExpr:
    """Symbolic evaluation of a surface expression in a process context.

    Constant-folds whenever every leaf is concrete; symbolic-input
    references stay symbolic."""
    proc = s.procs[rank]
    if isinstance(e, lang.Num):
        return symbolic.IntConst(e.value)
    if isinstance(e, lang.Var):
        v = proc.env.get(e.name)
        if v is not None:
            return v
        if e.name in s.compiled.domains:
            return symbolic.SymRef(e.name)
        raise EngineError(f"unbound variable {e.name!r} (validation should reject this)")
    if isinstance(e, lang.Rank):
        return symbolic.IntConst(rank)
    if isinstance(e, lang.Nprocs):
        return symbolic.IntConst(s.nprocs)
    if isinstance(e, lang.Unary):
        return symbolic.unary(e.op, eval_expr(s, rank, e.operand))
    return symbolic.binary(e.op, eval_expr(s, rank, e.left), eval_expr(s, rank, e.right))


def assume(s: GlobalState, cond: SymExpr) -> GlobalState:
    """Append a boolean constraint to the path condition (no solver call)."""
    if symbolic.sort_of(cond) != "bool":
        raise EngineError("assume needs a boolean-sorted expression")
    s.pc = s.pc + (cond,)
    return s


def advance(s: GlobalState, ranks: Iterable[int]) -> GlobalState:
    """Move cursors past the current statement; running off the end of the
    body exits the process."""
    compiled = s.compiled
    for r in ranks:
        proc = s.procs[r]
        if proc.pc_loc >= compiled.end:
            raise EngineError(f"advance past end of body (rank {r})")
        proc.pc_loc = compiled.next_of[proc.pc_loc]
        if proc.pc_loc >= compiled.end:
            proc.status = Status.EXITED
            proc.blocked_on = None
    return s


def match_transfer(s: GlobalState, sender: int, receiver: int) -> GlobalState:
    """Synchronize a send with a receive: the receiver binds the sender's
    payload, both processes wake and advance, and a MatchEvent is recorded.

    Either side may be blocked or currently executing its statement; the
    pairing must be consistent (mismatches are engine bugs).
    """
    if sender == receiver:
        raise EngineError("a process cannot match with itself")
    sp = s.procs[sender]
    rp = s.procs[receiver]

    if isinstance(sp.blocked_on, WaitSend):
        if sp.blocked_on.dest != receiver:
            raise EngineError("sender is blocked on a different destination")
        payload = sp.blocked_on.payload
    else:
        op = s.compiled.op_at(sp.pc_loc)
        if not isinstance(op, ops.OpSend):
            raise EngineError("sender is not at a send")
        payload = eval_expr(s, sender, op.payload)

    wildcard = False
    if isinstance(rp.blocked_on, WaitRecv):
        if rp.blocked_on.src != sender:
            raise EngineError("receiver expects a different source")
        var = rp.blocked_on.var
    elif isinstance(rp.blocked_on, WaitRecvAny):
        var = rp.blocked_on.var
        wildcard = True
    else:
        op = s.compiled.op_at(rp.pc_loc)
        if not isinstance(op, ops.OpRecv):
            raise EngineError("receiver is not at a receive")
        var = op.var
        wildcard = op.src is None

    rp.env[var] = payload
    sp.status = Status.ACTIVE
    sp.blocked_on = None
    rp.status = Status.ACTIVE
    rp.blocked_on = None
    s.trace.append(MatchEvent(sender, receiver, wildcard))
    advance(s, (sender, receiver))
    return s
