"""Lowering of structured bodies to a flat statement table.

A process cursor is then a single integer index; `end` (== len(ops)) means
the process ran off the end of its body.  Branch joins become jump entries
that are resolved away at lowering time, so a cursor never rests on one:
`next_of[i]` is the post-resolution successor of entry `i`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from . import lang


@dataclass(frozen=True)
class OpAssign:
    var: str
    expr: lang.Expr
    line: int


@dataclass(frozen=True)
class OpBranch:
    cond: lang.Expr
    true_target: int
    false_target: int
    line: int


@dataclass(frozen=True)
class OpSend:
    payload: lang.Expr
    dest: lang.Expr
    line: int


@dataclass(frozen=True)
class OpRecv:
    var: str
    src: Optional[lang.Expr]  # None receives from any sender
    line: int


@dataclass(frozen=True)
class OpBarrier:
    line: int


@dataclass(frozen=True)
class OpAssert:
    cond: lang.Expr
    line: int


@dataclass(frozen=True)
class OpExit:
    line: int


@dataclass(frozen=True)
class _Jump:
    target: int


COMM_OPS = (OpSend, OpRecv, OpBarrier)


@dataclass(frozen=True)
class CompiledProgram:
    program: lang.Program
    ops: Tuple
    next_of: Tuple[int, ...]
    domains: Dict[str, Tuple[int, int]]

    @property
    def end(self) -> int:
        return len(self.ops)

    def op_at(self, pc: int):
        return self.ops[pc]

    def line_of(self, pc: int) -> int:
        return self.ops[pc].line if pc < len(self.ops) else 0


def _lower_block(stmts, out: list):
    for st in stmts:
        if isinstance(st, lang.Assign):
            out.append(OpAssign(st.var, st.expr, st.line))
        elif isinstance(st, lang.Send):
            out.append(OpSend(st.payload, st.dest, st.line))
        elif isinstance(st, lang.Recv):
            out.append(OpRecv(st.var, st.src, st.line))
        elif isinstance(st, lang.Barrier):
            out.append(OpBarrier(st.line))
        elif isinstance(st, lang.Assert):
            out.append(OpAssert(st.cond, st.line))
        elif isinstance(st, lang.Exit):
            out.append(OpExit(st.line))
        elif isinstance(st, lang.If):
            branch_at = len(out)
            out.append(None)  # patched below
            _lower_block(st.then_body, out)
            jump_at = len(out)
            out.append(None)
            else_start = len(out)
            _lower_block(st.else_body, out)
            join = len(out)
            out[branch_at] = OpBranch(st.cond, branch_at + 1, else_start, st.line)
            out[jump_at] = _Jump(join)
        else:  # pragma: no cover - parser produces no other nodes
            raise lang.LangError(f"cannot lower {st!r}")


def _resolve(ops, i: int) -> int:
    while i < len(ops) and isinstance(ops[i], _Jump):
        i = ops[i].target
    return i


def lower(program: lang.Program) -> CompiledProgram:
    raw: list = []
    _lower_block(program.body, raw)
    ops = []
    for op in raw:
        if isinstance(op, OpBranch):
            ops.append(OpBranch(op.cond, _resolve(raw, op.true_target),
                                _resolve(raw, op.false_target), op.line))
        else:
            ops.append(op)
    next_of = tuple(_resolve(raw, i + 1) for i in range(len(ops)))
    domains = {d.name: (d.lo, d.hi) for d in program.decls}
    return CompiledProgram(program, tuple(ops), next_of, domains)


def entry_point(compiled: CompiledProgram) -> int:
    """First executable entry (the body may start with a resolved jump)."""
    return _resolve(compiled.ops, 0)
