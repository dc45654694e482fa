"""Full-interleaving explicit-state exploration, as ground truth for the
reduced engine.

The oracle runs a closed system: all symbolic inputs are pinned to a
concrete model, and every interleaving of global actions is explored with
visited-state deduplication.  Global actions are the composition of one
step per participating process:

  * ``SR(i, j)``      rendezvous of Send at i with a source-specific Recv at j
  * ``SRStar(i, j)``  rendezvous of Send at i with a wildcard Recv at j
  * ``B``             all processes step past a barrier together
  * ``Local(i)``      any non-communication statement of process i

A barrier needs every process of the program to arrive; a process that ran
off its body without reaching one disables B forever, so the remaining
processes wedge, exactly like a missing collective call does.

``check_theorem`` is the differential test: for a pinned model, the set of
deadlocked terminal states (canonicalized) and, per terminal, the set of
reachable global-action path lengths must coincide between the engine and
this oracle.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Set, Tuple

from . import engine, lang, ops, symbolic
from .solver import Model
from .state import BarrierRelease, MatchEvent, StepEvent, Verdict


class OracleError(Exception):
    pass


class BoundExceeded(OracleError):
    pass


# -- global actions -----------------------------------------------------------


@dataclass(frozen=True)
class SR:
    sender: int
    receiver: int


@dataclass(frozen=True)
class SRStar:
    sender: int
    receiver: int


@dataclass(frozen=True)
class B:
    pass


@dataclass(frozen=True)
class Local:
    rank: int


GlobalAction = object


def weight(action: GlobalAction) -> int:
    """Total order on communication actions: a barrier weighs 1; a
    rendezvous weighs the lower of its two participating ranks."""
    if isinstance(action, B):
        return 1
    if isinstance(action, (SR, SRStar)):
        return min(action.sender, action.receiver)
    raise OracleError(f"no weight defined for {action!r}")


def _action_sort_key(a: GlobalAction):
    if isinstance(a, B):
        return (0, 0, 0)
    if isinstance(a, SR):
        return (1, a.sender, a.receiver)
    if isinstance(a, SRStar):
        return (2, a.sender, a.receiver)
    return (3, a.rank, 0)


# -- concrete states ----------------------------------------------------------


class ConcreteState:
    __slots__ = ("compiled", "nprocs", "inputs", "cursors", "envs", "fail_loc")

    def __init__(self, compiled: ops.CompiledProgram, nprocs: int, inputs: Model):
        self.compiled = compiled
        self.nprocs = nprocs
        self.inputs = inputs
        start = ops.entry_point(compiled)
        self.cursors = [start] * nprocs
        self.envs: List[Dict[str, int]] = [{} for _ in range(nprocs)]
        self.fail_loc: Optional[int] = None

    def copy(self) -> "ConcreteState":
        t = ConcreteState.__new__(ConcreteState)
        t.compiled = self.compiled
        t.nprocs = self.nprocs
        t.inputs = self.inputs
        t.cursors = list(self.cursors)
        t.envs = [dict(e) for e in self.envs]
        t.fail_loc = self.fail_loc
        return t

    def exited(self, r: int) -> bool:
        return self.cursors[r] >= self.compiled.end

    def all_exited(self) -> bool:
        return all(self.exited(r) for r in range(self.nprocs))

    def current_op(self, r: int):
        return None if self.exited(r) else self.compiled.op_at(self.cursors[r])

    def eval(self, r: int, e: lang.Expr):
        return lang.eval_concrete(e, self.envs[r], r, self.nprocs, self.inputs)

    def canonical(self):
        return canonical_key(self.cursors, self.envs, self.compiled, self.nprocs)


def canonical_key(cursors, envs, compiled: ops.CompiledProgram, nprocs: int):
    """Identity of a state for the theorem comparison: cursors, concrete
    environments, exit flags, and the derived barrier-waiting set.  Traces
    are deliberately excluded."""
    at_barrier = frozenset(
        r for r in range(nprocs)
        if cursors[r] < compiled.end and isinstance(compiled.op_at(cursors[r]), ops.OpBarrier))
    pending = frozenset(range(nprocs)) - at_barrier if at_barrier else frozenset()
    return (
        tuple(cursors),
        tuple(tuple(sorted(env.items())) for env in envs),
        tuple(cursors[r] >= compiled.end for r in range(nprocs)),
        pending,
    )


# -- transition relation -------------------------------------------------------


def enabled(s: ConcreteState) -> List[GlobalAction]:
    """Every composition-rule-enabled action in s, deterministically ordered."""
    if s.fail_loc is not None:
        return []
    acts: List[GlobalAction] = []
    n = s.nprocs
    if n > 0 and all(isinstance(s.current_op(r), ops.OpBarrier) for r in range(n)):
        acts.append(B())
    for i in range(n):
        op = s.current_op(i)
        if op is None:
            continue
        if isinstance(op, (ops.OpAssign, ops.OpBranch, ops.OpAssert, ops.OpExit)):
            acts.append(Local(i))
        elif isinstance(op, ops.OpSend):
            j = s.eval(i, op.dest)
            if not 0 <= j < n or j == i:
                raise OracleError(f"send destination {j} invalid at rank {i}")
            partner = s.current_op(j)
            if isinstance(partner, ops.OpRecv):
                if partner.src is None:
                    acts.append(SRStar(i, j))
                elif s.eval(j, partner.src) == i:
                    acts.append(SR(i, j))
    acts.sort(key=_action_sort_key)
    return acts


def apply(s: ConcreteState, action: GlobalAction) -> ConcreteState:
    """Successor state under one enabled global action."""
    compiled = s.compiled
    t = s.copy()

    def step(r: int):
        t.cursors[r] = compiled.next_of[t.cursors[r]]

    if isinstance(action, (SR, SRStar)):
        i, j = action.sender, action.receiver
        send_op = s.current_op(i)
        recv_op = s.current_op(j)
        if not isinstance(send_op, ops.OpSend) or not isinstance(recv_op, ops.OpRecv):
            raise OracleError(f"{action!r} not enabled")
        t.envs[j][recv_op.var] = s.eval(i, send_op.payload)
        step(i)
        step(j)
        return t
    if isinstance(action, B):
        for r in range(s.nprocs):
            if not isinstance(s.current_op(r), ops.OpBarrier):
                raise OracleError("barrier applied while some process is elsewhere")
            step(r)
        return t
    if isinstance(action, Local):
        r = action.rank
        op = s.current_op(r)
        if isinstance(op, ops.OpAssign):
            t.envs[r][op.var] = s.eval(r, op.expr)
            step(r)
        elif isinstance(op, ops.OpBranch):
            t.cursors[r] = op.true_target if s.eval(r, op.cond) else op.false_target
        elif isinstance(op, ops.OpAssert):
            if s.eval(r, op.cond):
                step(r)
            else:
                t.fail_loc = s.cursors[r]
        elif isinstance(op, ops.OpExit):
            t.cursors[r] = compiled.end
        else:
            raise OracleError(f"Local({r}) not enabled")
        return t
    raise OracleError(f"unknown action {action!r}")


def ample_of(s: ConcreteState) -> List[GlobalAction]:
    """The subset of enabled actions a reduced exploration needs: a barrier
    alone, else the lowest-weight source-specific rendezvous alone, else
    everything (wildcard matches and local steps are expanded in full)."""
    acts = enabled(s)
    for a in acts:
        if isinstance(a, B):
            return [a]
    srs = [a for a in acts if isinstance(a, SR)]
    if srs:
        return [min(srs, key=weight)]
    return acts


# -- exhaustive exploration -----------------------------------------------------


@dataclass
class OracleResult:
    terminals: Dict[tuple, Tuple[str, int]]  # canonical -> (tag, shortest length)
    visited: int

    def deadlocks(self) -> Dict[tuple, int]:
        return {k: length for k, (tag, length) in self.terminals.items()
                if tag == "deadlock"}

    @property
    def deadlock_reachable(self) -> bool:
        return any(tag == "deadlock" for tag, _ in self.terminals.values())


def _terminal_tag(s: ConcreteState) -> str:
    if s.fail_loc is not None:
        return "assertfail"
    if s.all_exited():
        return "terminated"
    return "deadlock"


def make_initial(program: lang.Program, nprocs: int, model: Model,
                 compiled: Optional[ops.CompiledProgram] = None) -> ConcreteState:
    compiled = compiled if compiled is not None else ops.lower(program)
    for d in program.decls:
        if d.name not in model:
            raise OracleError(f"model does not assign {d.name!r}")
        if not d.lo <= model[d.name] <= d.hi:
            raise OracleError(f"model value {d.name}={model[d.name]} outside domain")
    return ConcreteState(compiled, nprocs, dict(model))


def explore_full(program: lang.Program, nprocs: int, model: Model,
                 state_bound: int = 200_000) -> OracleResult:
    """Exhaustive BFS over all interleavings with canonical-state dedup."""
    init = make_initial(program, nprocs, model)
    seen = {init.canonical()}
    queue = deque([(init, 0)])
    terminals: Dict[tuple, Tuple[str, int]] = {}
    visited = 0
    while queue:
        s, depth = queue.popleft()
        visited += 1
        if visited > state_bound:
            raise BoundExceeded(f"oracle state bound {state_bound} exceeded")
        acts = enabled(s)
        if not acts:
            key = s.canonical()
            if key not in terminals:
                terminals[key] = (_terminal_tag(s), depth)
            continue
        for a in acts:
            t = apply(s, a)
            key = t.canonical()
            if key not in seen:
                seen.add(key)
                queue.append((t, depth + 1))
    return OracleResult(terminals=terminals, visited=visited)


def deadlock_path_lengths(program: lang.Program, nprocs: int, model: Model,
                          state_bound: int = 200_000) -> Tuple[Dict[tuple, FrozenSet[int]], int]:
    """For every deadlocked terminal, the set of path lengths (in global
    actions) over ALL executions reaching it, plus the visited-state count.

    The state graph is acyclic (the language has no loops), so lengths are
    computed by propagating depth sets over the deduplicated graph.
    """
    init = make_initial(program, nprocs, model)
    key0 = init.canonical()
    nodes: Dict[tuple, ConcreteState] = {key0: init}
    edges: Dict[tuple, List[tuple]] = {}
    queue = deque([key0])
    visited = 0
    while queue:
        key = queue.popleft()
        visited += 1
        if visited > state_bound:
            raise BoundExceeded(f"oracle state bound {state_bound} exceeded")
        s = nodes[key]
        targets = []
        for a in enabled(s):
            t = apply(s, a)
            tkey = t.canonical()
            targets.append(tkey)
            if tkey not in nodes:
                nodes[tkey] = t
                queue.append(tkey)
        edges[key] = targets

    lengths: Dict[tuple, Set[int]] = {key0: {0}}
    indeg: Dict[tuple, int] = {k: 0 for k in nodes}
    for k, targets in edges.items():
        for t in targets:
            indeg[t] += 1
    topo = deque(k for k, d in indeg.items() if d == 0)
    while topo:
        k = topo.popleft()
        ls = lengths.get(k, set())
        for t in edges[k]:
            lengths.setdefault(t, set()).update(x + 1 for x in ls)
            indeg[t] -= 1
            if indeg[t] == 0:
                topo.append(t)

    out: Dict[tuple, FrozenSet[int]] = {}
    for key, targets in edges.items():
        if not targets and _terminal_tag(nodes[key]) == "deadlock":
            out[key] = frozenset(lengths.get(key, set()))
    return out, visited


# -- engine-side correspondence --------------------------------------------------


def global_action_count(trace, compiled: ops.CompiledProgram) -> int:
    """Length of an engine trace measured in oracle global actions: each
    match and each barrier release is one action, each executed
    non-communication statement is one Local action, and blocking steps
    contribute nothing (a rendezvous is a single action, not two)."""
    n = 0
    for ev in trace:
        if isinstance(ev, (MatchEvent, BarrierRelease)):
            n += 1
        elif isinstance(ev, StepEvent):
            op = compiled.op_at(ev.loc)
            if isinstance(op, (ops.OpAssign, ops.OpBranch, ops.OpAssert, ops.OpExit)):
                n += 1
    return n


def engine_terminal_canonical(record: engine.PathRecord, model: Model) -> tuple:
    """Canonicalize an engine terminal state under the pinned model, making
    it comparable with oracle terminals."""
    s = record.final_state
    if s is None:
        raise OracleError("path record carries no final state")
    envs = []
    for p in s.procs:
        envs.append({name: symbolic.evaluate(v, model) for name, v in p.env.items()})
    return canonical_key([p.pc_loc for p in s.procs], envs, s.compiled, s.nprocs)


@dataclass
class TheoremVerdict:
    holds: bool
    model: Model
    issues: List[str] = field(default_factory=list)
    engine_deadlocks: Dict[tuple, FrozenSet[int]] = field(default_factory=dict)
    oracle_deadlocks: Dict[tuple, FrozenSet[int]] = field(default_factory=dict)
    engine_states: int = 0
    oracle_states: int = 0


def check_theorem(program: lang.Program, nprocs: int, model: Model,
                  state_bound: int = 200_000) -> TheoremVerdict:
    """Differential equivalence check for one concrete model.

    Holds iff (a) the engine's pinned run reaches a deadlock exactly when
    the full-interleaving graph does, (b) the canonical deadlocked terminal
    states coincide, and (c) for each such terminal the sets of reachable
    path lengths (in global actions) coincide.
    """
    report = engine.search(program, nprocs, pin_model=model,
                           strategy=engine.SearchStrategy(max_states=state_bound))
    if report.truncated:
        raise BoundExceeded(f"engine state bound {state_bound} exceeded under pinned model")
    for rec in report.records:
        if rec.verdict is Verdict.ERROR:
            raise OracleError(f"engine reported an analysis error: {rec.error}")

    eng: Dict[tuple, Set[int]] = {}
    for rec in report.by_verdict(Verdict.DEADLOCK):
        key = engine_terminal_canonical(rec, model)
        eng.setdefault(key, set()).add(global_action_count(rec.trace, rec.final_state.compiled))
    engine_deadlocks = {k: frozenset(v) for k, v in eng.items()}

    oracle_deadlocks, visited = deadlock_path_lengths(program, nprocs, model, state_bound)

    issues: List[str] = []
    if bool(engine_deadlocks) != bool(oracle_deadlocks):
        side = "engine" if engine_deadlocks else "oracle"
        issues.append(f"deadlock reachable only on the {side} side")
    only_eng = set(engine_deadlocks) - set(oracle_deadlocks)
    only_orc = set(oracle_deadlocks) - set(engine_deadlocks)
    for key in sorted(only_eng):
        issues.append(f"deadlocked terminal only reached by the engine: cursors={key[0]}")
    for key in sorted(only_orc):
        issues.append(f"deadlocked terminal only reached by the oracle: cursors={key[0]}")
    for key in sorted(set(engine_deadlocks) & set(oracle_deadlocks)):
        if engine_deadlocks[key] != oracle_deadlocks[key]:
            issues.append(
                f"path-length sets differ at cursors={key[0]}: "
                f"engine={sorted(engine_deadlocks[key])} oracle={sorted(oracle_deadlocks[key])}")

    return TheoremVerdict(holds=not issues, model=dict(model), issues=issues,
                          engine_deadlocks=engine_deadlocks,
                          oracle_deadlocks=oracle_deadlocks,
                          engine_states=report.states_created,
                          oracle_states=visited)
