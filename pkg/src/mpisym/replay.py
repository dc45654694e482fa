"""Recording explored paths as portable test cases and re-executing them.

A test case is the recorded input model plus the schedule trace of one
path; replaying feeds the recorded input to a concrete interpreter and
follows the recorded schedule event by event, so reproduction is
deterministic and needs no solver.  Any disagreement between an event and
what the concrete semantics actually does is reported as a divergence.

File format (one event per line, LF, UTF-8)::

    mpisym-testcase v1
    program-hash <sha256 of the canonical pretty-printed source>
    nprocs <N>
    INPUT
    <name>=<int>
    TRACE
    step rank=<r> loc=<op index>
    match sender=<r> receiver=<r> wildcard=<yes|no>
    branch loc=<op index> taken=<yes|no>
    release epoch=<k>
    VERDICT
    terminated | deadlock | assertfail loc=<op index>
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from . import engine, lang, ops
from .state import (BarrierRelease, BranchChoice, MatchEvent, StepEvent,
                    Verdict)

FORMAT_HEADER = "mpisym-testcase v1"


class ReplayError(Exception):
    pass


def program_hash(program: lang.Program) -> str:
    """Whitespace-insensitive program identity: hash of the canonical form."""
    return hashlib.sha256(lang.pretty_print(program).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class TestCase:
    program_hash: str
    nprocs: int
    model: Tuple[Tuple[str, int], ...]
    trace: Tuple
    verdict: Verdict
    fail_loc: Optional[int] = None
    version: int = 1

    def model_dict(self) -> Dict[str, int]:
        return dict(self.model)


def make_testcase(record: engine.PathRecord, program: lang.Program,
                  nprocs: int) -> TestCase:
    if record.verdict is Verdict.ERROR:
        raise ReplayError("analysis-error paths are not replayable")
    return TestCase(
        program_hash=program_hash(program),
        nprocs=nprocs,
        model=tuple(record.model.items()),
        trace=tuple(record.trace),
        verdict=record.verdict,
        fail_loc=record.fail_loc,
    )


def _yn(flag: bool) -> str:
    return "yes" if flag else "no"


def dumps(tc: TestCase) -> str:
    lines = [FORMAT_HEADER,
             f"program-hash {tc.program_hash}",
             f"nprocs {tc.nprocs}",
             "INPUT"]
    for name, value in tc.model:
        lines.append(f"{name}={value}")
    lines.append("TRACE")
    for ev in tc.trace:
        if isinstance(ev, StepEvent):
            lines.append(f"step rank={ev.rank} loc={ev.loc}")
        elif isinstance(ev, MatchEvent):
            lines.append(f"match sender={ev.sender} receiver={ev.receiver} "
                         f"wildcard={_yn(ev.wildcard)}")
        elif isinstance(ev, BranchChoice):
            lines.append(f"branch loc={ev.loc} taken={_yn(ev.taken)}")
        elif isinstance(ev, BarrierRelease):
            lines.append(f"release epoch={ev.epoch}")
        else:
            raise ReplayError(f"unknown trace event {ev!r}")
    lines.append("VERDICT")
    if tc.verdict is Verdict.ASSERT_FAIL:
        lines.append(f"assertfail loc={tc.fail_loc}")
    else:
        lines.append(tc.verdict.value)
    return "\n".join(lines) + "\n"


def _fields(parts: List[str], expect: Tuple[str, ...], line_no: int) -> List[str]:
    values = []
    if len(parts) != len(expect):
        raise ReplayError(f"line {line_no}: malformed event")
    for part, key in zip(parts, expect):
        if not part.startswith(key + "="):
            raise ReplayError(f"line {line_no}: expected field {key!r}")
        values.append(part[len(key) + 1:])
    return values


def loads(text: str) -> TestCase:
    lines = text.splitlines()
    if not lines or lines[0].strip() != FORMAT_HEADER:
        raise ReplayError(f"not a test case file (expected {FORMAT_HEADER!r})")
    if len(lines) < 3 or not lines[1].startswith("program-hash ") \
            or not lines[2].startswith("nprocs "):
        raise ReplayError("missing program-hash/nprocs header")
    phash = lines[1].split(None, 1)[1].strip()
    nprocs = int(lines[2].split(None, 1)[1])

    sections = {"INPUT": [], "TRACE": [], "VERDICT": []}
    current = None
    for i, raw in enumerate(lines[3:], start=4):
        text_line = raw.strip()
        if not text_line:
            continue
        if text_line in sections:
            current = text_line
            continue
        if current is None:
            raise ReplayError(f"line {i}: content before INPUT section")
        sections[current].append((i, text_line))

    model = []
    for i, entry in sections["INPUT"]:
        if "=" not in entry:
            raise ReplayError(f"line {i}: malformed input binding")
        name, value = entry.split("=", 1)
        model.append((name.strip(), int(value)))

    trace = []
    for i, entry in sections["TRACE"]:
        parts = entry.split()
        kind = parts[0]
        if kind == "step":
            r, loc = _fields(parts[1:], ("rank", "loc"), i)
            trace.append(StepEvent(int(r), int(loc)))
        elif kind == "match":
            snd, rcv, wc = _fields(parts[1:], ("sender", "receiver", "wildcard"), i)
            trace.append(MatchEvent(int(snd), int(rcv), wc == "yes"))
        elif kind == "branch":
            loc, taken = _fields(parts[1:], ("loc", "taken"), i)
            trace.append(BranchChoice(int(loc), taken == "yes"))
        elif kind == "release":
            (epoch,) = _fields(parts[1:], ("epoch",), i)
            trace.append(BarrierRelease(int(epoch)))
        else:
            raise ReplayError(f"line {i}: unknown event {kind!r}")

    if not sections["VERDICT"]:
        raise ReplayError("missing VERDICT section")
    _, vline = sections["VERDICT"][0]
    vparts = vline.split()
    fail_loc = None
    if vparts[0] == "assertfail":
        verdict = Verdict.ASSERT_FAIL
        (loc,) = _fields(vparts[1:], ("loc",), 0)
        fail_loc = int(loc)
    else:
        try:
            verdict = Verdict(vparts[0])
        except ValueError:
            raise ReplayError(f"unknown verdict {vparts[0]!r}") from None

    return TestCase(program_hash=phash, nprocs=nprocs, model=tuple(model),
                    trace=tuple(trace), verdict=verdict, fail_loc=fail_loc)


def save_testcase(record: engine.PathRecord, program: lang.Program,
                  nprocs: int, path) -> TestCase:
    tc = make_testcase(record, program, nprocs)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(tc))
    return tc


def load_testcase(path) -> TestCase:
    with open(path, "r", encoding="utf-8") as fh:
        return loads(fh.read())


# -- concrete replay ------------------------------------------------------------


@dataclass(frozen=True)
class Divergence:
    event_index: int
    expected: str
    observed: str

    def __str__(self):
        return f"event {self.event_index}: expected {self.expected}, observed {self.observed}"


@dataclass
class ReplayResult:
    verdict: Optional[Verdict]
    expected: Verdict
    divergences: List[Divergence] = field(default_factory=list)
    final_cursors: Tuple[int, ...] = ()
    final_envs: Tuple = ()

    @property
    def ok(self) -> bool:
        return not self.divergences and self.verdict is self.expected


class _Proc:
    __slots__ = ("cursor", "env", "blocked", "exited")

    def __init__(self, cursor: int):
        self.cursor = cursor
        self.env: Dict[str, int] = {}
        self.blocked = None  # ("send", dest, payload) | ("recv", src, var) | ("any", var) | ("barrier",)
        self.exited = False


class _Replayer:
    def __init__(self, program: lang.Program, tc: TestCase):
        self.compiled = ops.lower(program)
        self.nprocs = tc.nprocs
        self.inputs = tc.model_dict()
        start = ops.entry_point(self.compiled)
        self.procs = [_Proc(start) for _ in range(self.nprocs)]
        for p in self.procs:
            if p.cursor >= self.compiled.end:
                p.exited = True
        self.pending: set = set()
        self.epoch = 0
        self.fail_loc: Optional[int] = None
        self.events = list(tc.trace)
        self.pos = 0
        self.divergences: List[Divergence] = []

    # -- event cursor --

    def take(self):
        ev = self.events[self.pos]
        self.pos += 1
        return ev

    def peek(self):
        return self.events[self.pos] if self.pos < len(self.events) else None

    def diverge(self, expected: str, observed: str) -> bool:
        self.divergences.append(Divergence(self.pos, expected, observed))
        return False

    # -- execution --

    def eval(self, r: int, e: lang.Expr):
        return lang.eval_concrete(e, self.procs[r].env, r, self.nprocs, self.inputs)

    def step_forward(self, r: int):
        p = self.procs[r]
        p.cursor = self.compiled.next_of[p.cursor]
        if p.cursor >= self.compiled.end:
            p.exited = True
            p.blocked = None

    def transfer(self, sender: int, receiver: int, payload: int, var: str):
        self.procs[receiver].env[var] = payload
        self.procs[sender].blocked = None
        self.procs[receiver].blocked = None
        self.step_forward(sender)
        self.step_forward(receiver)

    def run(self) -> bool:
        """Consume every event; False as soon as a divergence is recorded."""
        while self.pos < len(self.events):
            ev = self.take()
            if isinstance(ev, StepEvent):
                if not self.exec_step(ev):
                    return False
            elif isinstance(ev, MatchEvent):
                if not ev.wildcard:
                    return self.diverge("a step before any source-specific match",
                                        f"standalone {ev}")
                if not self.exec_wildcard(ev):
                    return False
            else:
                return self.diverge("step or wildcard match event", repr(ev))
        return True

    def exec_wildcard(self, ev: MatchEvent) -> bool:
        snd = self.procs[ev.sender]
        rcv = self.procs[ev.receiver]
        if snd.blocked is None or snd.blocked[0] != "send" or snd.blocked[1] != ev.receiver:
            return self.diverge(f"rank {ev.sender} blocked sending to {ev.receiver}",
                                f"blocked={snd.blocked!r}")
        if rcv.blocked is None or rcv.blocked[0] != "any":
            return self.diverge(f"rank {ev.receiver} blocked on a wildcard receive",
                                f"blocked={rcv.blocked!r}")
        self.transfer(ev.sender, ev.receiver, snd.blocked[2], rcv.blocked[1])
        return True

    def exec_step(self, ev: StepEvent) -> bool:
        r = ev.rank
        if not 0 <= r < self.nprocs:
            return self.diverge("a valid rank", f"rank {r}")
        p = self.procs[r]
        if p.exited or p.blocked is not None:
            return self.diverge(f"rank {r} runnable", "exited" if p.exited else "blocked")
        if p.cursor != ev.loc:
            return self.diverge(f"rank {r} at loc {ev.loc}", f"loc {p.cursor}")
        op = self.compiled.op_at(p.cursor)

        if isinstance(op, ops.OpAssign):
            p.env[op.var] = self.eval(r, op.expr)
            self.step_forward(r)
            return True

        if isinstance(op, ops.OpBranch):
            nxt = self.peek()
            if not isinstance(nxt, BranchChoice) or nxt.loc != ev.loc:
                return self.diverge("a branch-choice event", repr(nxt))
            self.take()
            actual = bool(self.eval(r, op.cond))
            if actual != nxt.taken:
                return self.diverge(f"branch at loc {ev.loc} taken={_yn(nxt.taken)}",
                                    f"condition evaluated to {_yn(actual)}")
            p.cursor = op.true_target if actual else op.false_target
            if p.cursor >= self.compiled.end:
                p.exited = True
            return True

        if isinstance(op, ops.OpAssert):
            nxt = self.peek()
            if not isinstance(nxt, BranchChoice) or nxt.loc != ev.loc:
                return self.diverge("an assertion-outcome event", repr(nxt))
            self.take()
            actual = bool(self.eval(r, op.cond))
            if actual != nxt.taken:
                return self.diverge(f"assertion at loc {ev.loc} -> {_yn(nxt.taken)}",
                                    f"condition evaluated to {_yn(actual)}")
            if actual:
                self.step_forward(r)
            else:
                self.fail_loc = ev.loc
            return True

        if isinstance(op, ops.OpSend):
            dest = self.eval(r, op.dest)
            payload = self.eval(r, op.payload)
            nxt = self.peek()
            if isinstance(nxt, MatchEvent) and not nxt.wildcard:
                if nxt.sender != r or nxt.receiver != dest:
                    return self.diverge(f"match {r}->{dest}",
                                        f"match {nxt.sender}->{nxt.receiver}")
                q = self.procs[dest]
                if q.blocked is None or q.blocked[0] != "recv" or q.blocked[1] != r:
                    return self.diverge(f"rank {dest} blocked receiving from {r}",
                                        f"blocked={q.blocked!r}")
                self.take()
                self.transfer(r, dest, payload, q.blocked[2])
                return True
            q = self.procs[dest]
            if q.blocked is not None and q.blocked[0] == "recv" and q.blocked[1] == r:
                return self.diverge(f"rank {r} blocking on send to {dest}",
                                    "a matching receive was already posted")
            p.blocked = ("send", dest, payload)
            return True

        if isinstance(op, ops.OpRecv):
            if op.src is None:
                p.blocked = ("any", op.var)
                return True
            src = self.eval(r, op.src)
            nxt = self.peek()
            if isinstance(nxt, MatchEvent) and not nxt.wildcard:
                if nxt.sender != src or nxt.receiver != r:
                    return self.diverge(f"match {src}->{r}",
                                        f"match {nxt.sender}->{nxt.receiver}")
                q = self.procs[src]
                if q.blocked is None or q.blocked[0] != "send" or q.blocked[1] != r:
                    return self.diverge(f"rank {src} blocked sending to {r}",
                                        f"blocked={q.blocked!r}")
                self.take()
                self.transfer(src, r, q.blocked[2], op.var)
                return True
            q = self.procs[src]
            if q.blocked is not None and q.blocked[0] == "send" and q.blocked[1] == r:
                return self.diverge(f"rank {r} blocking on receive from {src}",
                                    "a matching send was already posted")
            p.blocked = ("recv", src, op.var)
            return True

        if isinstance(op, ops.OpBarrier):
            if not self.pending:
                members = set(range(self.nprocs)) - {r}
                if members:
                    self.pending = members
                    p.blocked = ("barrier",)
                    return True
                return self.release(r, [r])
            if r not in self.pending:
                return self.diverge(f"rank {r} pending on the open barrier", "not pending")
            self.pending.discard(r)
            if self.pending:
                p.blocked = ("barrier",)
                return True
            participants = [q for q in range(self.nprocs)
                            if self.procs[q].blocked is not None
                            and self.procs[q].blocked[0] == "barrier"] + [r]
            return self.release(r, sorted(participants))

        if isinstance(op, ops.OpExit):
            p.exited = True
            p.cursor = self.compiled.end
            return True

        return self.diverge("an executable statement", repr(op))

    def release(self, r: int, participants) -> bool:
        nxt = self.peek()
        if not isinstance(nxt, BarrierRelease):
            return self.diverge("a barrier-release event", repr(nxt))
        if nxt.epoch != self.epoch:
            return self.diverge(f"barrier epoch {self.epoch}", f"epoch {nxt.epoch}")
        self.take()
        self.epoch += 1
        for q in participants:
            self.procs[q].blocked = None
            self.step_forward(q)
        return True

    # -- wrap-up --

    def final_verdict(self) -> Optional[Verdict]:
        if self.fail_loc is not None:
            return Verdict.ASSERT_FAIL
        if all(p.exited for p in self.procs):
            return Verdict.TERMINATED
        runnable = [r for r in range(self.nprocs)
                    if not self.procs[r].exited and self.procs[r].blocked is None]
        if runnable:
            self.diverge("trace covering every runnable process",
                         f"rank {runnable[0]} still runnable at end of trace")
            return None
        # A wildcard receiver with a blocked sender still has a successor.
        for rr in range(self.nprocs):
            p = self.procs[rr]
            if p.blocked is not None and p.blocked[0] == "any":
                for qq in range(self.nprocs):
                    q = self.procs[qq]
                    if q.blocked is not None and q.blocked[0] == "send" and q.blocked[1] == rr:
                        self.diverge("a deadlocked final state",
                                     f"wildcard match {qq}->{rr} still possible")
                        return None
        return Verdict.DEADLOCK


def replay_testcase(program: lang.Program, tc: TestCase) -> ReplayResult:
    """Re-execute a recorded path concretely, checking every event against
    the actual semantics; no solver is involved."""
    if program_hash(program) != tc.program_hash:
        raise ReplayError("program hash mismatch: test case was recorded for a different program")
    findings = lang.validate(program, tc.nprocs)
    if findings:
        raise ReplayError(f"program fails validation: {findings[0].message}")
    for d in program.decls:
        if d.name not in dict(tc.model):
            raise ReplayError(f"test case does not assign input {d.name!r}")

    rp = _Replayer(program, tc)
    completed = rp.run()
    verdict = rp.final_verdict() if completed else None
    return ReplayResult(
        verdict=verdict,
        expected=tc.verdict,
        divergences=rp.divergences,
        final_cursors=tuple(p.cursor for p in rp.procs),
        final_envs=tuple(tuple(sorted(p.env.items())) for p in rp.procs),
    )
