"""The analyzed mini message-passing language: AST, parser, validator,
pretty-printer, and concrete expression evaluation.

A source file declares bounded symbolic inputs and one rank-dispatched
process body:

    symbolic
    sym X : int[0..255];

    program (nprocs = 3) {
      if (rank == 0) { send 0 to 1; } else { recv v from any; }
    }

`repeat K { ... }` is sugar for K spliced copies of the block, so parsed
programs are always loop-free.  Statement equality ignores source
locations, which makes parse/pretty-print round-trips exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Tuple, Union


class LangError(Exception):
    pass


class ParseError(LangError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Rank:
    pass


@dataclass(frozen=True)
class Nprocs:
    pass


@dataclass(frozen=True)
class Unary:
    op: str  # "-" | "!"
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Num, Var, Rank, Nprocs, Unary, Binary]

RANK = Rank()
NPROCS = Nprocs()


@dataclass(frozen=True)
class Assign:
    var: str
    expr: Expr
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class If:
    cond: Expr
    then_body: Tuple["Stmt", ...]
    else_body: Tuple["Stmt", ...]
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Send:
    payload: Expr
    dest: Expr
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Recv:
    var: str
    src: Optional[Expr]  # None receives from any sender
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Barrier:
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Assert:
    cond: Expr
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Exit:
    line: int = field(default=0, compare=False)


Stmt = Union[Assign, If, Send, Recv, Barrier, Assert, Exit]


@dataclass(frozen=True)
class SymDecl:
    name: str
    lo: int
    hi: int
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Program:
    decls: Tuple[SymDecl, ...]
    nprocs_default: int
    body: Tuple[Stmt, ...]

    def sym_names(self) -> frozenset:
        return frozenset(d.name for d in self.decls)


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

KEYWORDS = {
    "symbolic", "sym", "int", "program", "nprocs", "if", "else",
    "send", "to", "recv", "from", "any", "barrier", "assert", "exit",
    "repeat", "rank",
}

RESERVED_NAMES = KEYWORDS

_TWO_CHAR = ("==", "!=", "<=", ">=", "&&", "||", "..")
_ONE_CHAR = "+-*(){}[];:=<>!,"

_CHAR_ESCAPES = {"n": 10, "t": 9, "0": 0, "\\": 92, "'": 39}


@dataclass(frozen=True)
class Token:
    kind: str  # "ident" | "int" | "kw" | punctuation text | "eof"
    value: object
    line: int
    col: int


def tokenize(text: str):
    tokens = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_col = col
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = "kw" if word in KEYWORDS else "ident"
            tokens.append(Token(kind, word, line, start_col))
            col += j - i
            i = j
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(Token("int", int(text[i:j]), line, start_col))
            col += j - i
            i = j
            continue
        if c == "'":
            j = i + 1
            if j < n and text[j] == "\\":
                if j + 2 >= n or text[j + 2] != "'" or text[j + 1] not in _CHAR_ESCAPES:
                    raise ParseError("bad character literal", line, start_col)
                tokens.append(Token("int", _CHAR_ESCAPES[text[j + 1]], line, start_col))
                i = j + 3
                col += 4
                continue
            if j + 1 >= n or text[j + 1] != "'" or text[j] == "\n":
                raise ParseError("bad character literal", line, start_col)
            tokens.append(Token("int", ord(text[j]), line, start_col))
            i = j + 2
            col += 3
            continue
        two = text[i:i + 2]
        if two in _TWO_CHAR:
            tokens.append(Token(two, two, line, start_col))
            i += 2
            col += 2
            continue
        if c in _ONE_CHAR:
            tokens.append(Token(c, c, line, start_col))
            i += 1
            col += 1
            continue
        raise ParseError(f"unexpected character {c!r}", line, start_col)
    tokens.append(Token("eof", None, line, col))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def at(self, kind: str, value=None) -> bool:
        tok = self.peek()
        return tok.kind == kind and (value is None or tok.value == value)

    def expect(self, kind: str, value=None) -> Token:
        tok = self.peek()
        if not self.at(kind, value):
            want = value if value is not None else kind
            raise ParseError(f"expected {want!r}, found {tok.value!r}", tok.line, tok.col)
        return self.next()

    def error(self, message: str):
        tok = self.peek()
        raise ParseError(message, tok.line, tok.col)

    # program := ("symbolic" decl*)? "program" ("(" "nprocs" "=" INT ")")? block

    def program(self) -> Program:
        decls = []
        if self.at("kw", "symbolic"):
            self.next()
            seen = set()
            while self.at("kw", "sym"):
                d = self.decl()
                if d.name in seen:
                    raise ParseError(f"duplicate symbolic declaration {d.name!r}", d.line, 1)
                seen.add(d.name)
                decls.append(d)
        elif self.at("kw", "sym"):
            self.error("symbolic declarations must follow a 'symbolic' header")
        self.expect("kw", "program")
        nprocs = 1
        if self.at("("):
            self.next()
            self.expect("kw", "nprocs")
            self.expect("=")
            tok = self.expect("int")
            nprocs = tok.value
            if nprocs < 1:
                raise ParseError("nprocs must be positive", tok.line, tok.col)
            self.expect(")")
        body = self.block()
        self.expect("eof")
        return Program(tuple(decls), nprocs, tuple(body))

    def decl(self) -> SymDecl:
        kw = self.expect("kw", "sym")
        name = self.ident("symbolic input name")
        self.expect(":")
        self.expect("kw", "int")
        self.expect("[")
        lo = self.expect("int").value
        self.expect("..")
        hi = self.expect("int").value
        self.expect("]")
        self.expect(";")
        return SymDecl(name, lo, hi, kw.line)

    def ident(self, what: str) -> str:
        tok = self.peek()
        if tok.kind == "kw":
            raise ParseError(f"reserved name {tok.value!r} cannot be used as {what}", tok.line, tok.col)
        if tok.kind != "ident":
            raise ParseError(f"expected {what}, found {tok.value!r}", tok.line, tok.col)
        self.next()
        return tok.value

    def block(self):
        self.expect("{")
        stmts = []
        while not self.at("}"):
            self.stmt(stmts)
        self.next()
        return stmts

    def stmt(self, out: list):
        tok = self.peek()
        if tok.kind == "kw":
            if tok.value == "if":
                self.next()
                self.expect("(")
                cond = self.expr()
                self.expect(")")
                then_body = self.block()
                else_body = []
                if self.at("kw", "else"):
                    self.next()
                    else_body = self.block()
                out.append(If(cond, tuple(then_body), tuple(else_body), tok.line))
                return
            if tok.value == "send":
                self.next()
                payload = self.expr()
                self.expect("kw", "to")
                dest = self.expr()
                self.expect(";")
                out.append(Send(payload, dest, tok.line))
                return
            if tok.value == "recv":
                self.next()
                var = self.ident("receive target variable")
                self.expect("kw", "from")
                src: Optional[Expr]
                if self.at("kw", "any"):
                    self.next()
                    src = None
                else:
                    src = self.expr()
                self.expect(";")
                out.append(Recv(var, src, tok.line))
                return
            if tok.value == "barrier":
                self.next()
                self.expect(";")
                out.append(Barrier(tok.line))
                return
            if tok.value == "assert":
                self.next()
                self.expect("(")
                cond = self.expr()
                self.expect(")")
                self.expect(";")
                out.append(Assert(cond, tok.line))
                return
            if tok.value == "exit":
                self.next()
                self.expect(";")
                out.append(Exit(tok.line))
                return
            if tok.value == "repeat":
                self.next()
                count = self.expect("int").value
                body = self.block()
                for _ in range(count):
                    out.extend(body)
                return
            if tok.value in ("rank", "nprocs", "any"):
                self.error(f"reserved name {tok.value!r} cannot be assigned")
            self.error(f"unexpected keyword {tok.value!r}")
        if tok.kind == "ident":
            var = self.ident("assignment target")
            self.expect("=")
            expr = self.expr()
            self.expect(";")
            out.append(Assign(var, expr, tok.line))
            return
        self.error(f"expected a statement, found {tok.value!r}")

    # Expressions, lowest precedence first: || && (== !=) (< <= > >=) (+ -) (*)

    def expr(self) -> Expr:
        return self._binary(0)

    _LEVELS = (("||",), ("&&",), ("==", "!="), ("<", "<=", ">", ">="), ("+", "-"), ("*",))

    def _binary(self, level: int) -> Expr:
        if level == len(self._LEVELS):
            return self._unary()
        ops = self._LEVELS[level]
        e = self._binary(level + 1)
        while self.peek().kind in ops:
            op = self.next().kind
            rhs = self._binary(level + 1)
            e = Binary(op, e, rhs)
        return e

    def _unary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "-":
            self.next()
            return Unary("-", self._unary())
        if tok.kind == "!":
            self.next()
            return Unary("!", self._unary())
        return self._primary()

    def _primary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "int":
            self.next()
            return Num(tok.value)
        if tok.kind == "kw" and tok.value == "rank":
            self.next()
            return RANK
        if tok.kind == "kw" and tok.value == "nprocs":
            self.next()
            return NPROCS
        if tok.kind == "ident":
            self.next()
            return Var(tok.value)
        if tok.kind == "(":
            self.next()
            e = self.expr()
            self.expect(")")
            return e
        self.error(f"expected an expression, found {tok.value!r}")


def parse_program(text: str) -> Program:
    """Parse a complete source file; raises ParseError with line/column."""
    return _Parser(text).program()


# ---------------------------------------------------------------------------
# Static validation
# ---------------------------------------------------------------------------

#: Upper bound on symbolic-input interval width accepted by the solver.
MAX_DOMAIN_WIDTH = 1 << 16


@dataclass(frozen=True)
class Finding:
    kind: str
    message: str
    line: int


def expr_sort(e: Expr) -> str:
    """Infer "int" or "bool"; variables and inputs are always integers."""
    if isinstance(e, (Num, Var, Rank, Nprocs)):
        return "int"
    if isinstance(e, Unary):
        return "int" if e.op == "-" else "bool"
    if e.op in ("&&", "||", "==", "!=", "<", "<=", ">", ">="):
        return "bool"
    return "int"


def _check_expr(e: Expr, want: str, defined, findings, line: int):
    if isinstance(e, Var):
        if defined is not None and e.name not in defined:
            findings.append(Finding("use-before-assign",
                                    f"variable {e.name!r} may be read before assignment", line))
    elif isinstance(e, Unary):
        _check_expr(e.operand, "int" if e.op == "-" else "bool", defined, findings, line)
    elif isinstance(e, Binary):
        sub = "bool" if e.op in ("&&", "||") else "int"
        _check_expr(e.left, sub, defined, findings, line)
        _check_expr(e.right, sub, defined, findings, line)
    if expr_sort(e) != want:
        findings.append(Finding("type", f"expected a {want} expression", line))


def _literal_rank(e: Expr):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Unary) and e.op == "-" and isinstance(e.operand, Num):
        return -e.operand.value
    return None


def _check_block(stmts, defined, sym_names, nprocs, findings):
    """Flow `defined` through a block; None means the tail is unreachable."""
    for st in stmts:
        if defined is None:
            break
        if isinstance(st, Assign):
            _check_expr(st.expr, "int", defined, findings, st.line)
            if st.var in sym_names:
                findings.append(Finding("assign-symbolic",
                                        f"cannot assign to symbolic input {st.var!r}", st.line))
            else:
                defined = defined | {st.var}
        elif isinstance(st, If):
            _check_expr(st.cond, "bool", defined, findings, st.line)
            d1 = _check_block(st.then_body, defined, sym_names, nprocs, findings)
            d2 = _check_block(st.else_body, defined, sym_names, nprocs, findings)
            if d1 is None:
                defined = d2
            elif d2 is None:
                defined = d1
            else:
                defined = d1 & d2
        elif isinstance(st, Send):
            _check_expr(st.payload, "int", defined, findings, st.line)
            _check_expr(st.dest, "int", defined, findings, st.line)
            lit = _literal_rank(st.dest)
            if lit is not None and not 0 <= lit < nprocs:
                findings.append(Finding("rank-range",
                                        f"send destination {lit} not in [0, {nprocs})", st.line))
        elif isinstance(st, Recv):
            if st.src is not None:
                _check_expr(st.src, "int", defined, findings, st.line)
                lit = _literal_rank(st.src)
                if lit is not None and not 0 <= lit < nprocs:
                    findings.append(Finding("rank-range",
                                            f"receive source {lit} not in [0, {nprocs})", st.line))
            if st.var in sym_names:
                findings.append(Finding("assign-symbolic",
                                        f"cannot receive into symbolic input {st.var!r}", st.line))
            else:
                defined = defined | {st.var}
        elif isinstance(st, Assert):
            _check_expr(st.cond, "bool", defined, findings, st.line)
        elif isinstance(st, Exit):
            defined = None
        elif isinstance(st, Barrier):
            pass
        else:  # pragma: no cover - parser produces no other nodes
            raise LangError(f"unknown statement {st!r}")
    return defined


def validate(program: Program, nprocs: int):
    """Static checks; returns a list of findings, empty when the program is
    safe to execute under `nprocs` processes."""
    if nprocs < 1:
        raise LangError("nprocs must be positive")
    findings: list = []
    for d in program.decls:
        if d.lo > d.hi:
            findings.append(Finding("empty-domain",
                                    f"domain of {d.name!r} is empty ([{d.lo}..{d.hi}])", d.line))
        elif d.hi - d.lo + 1 > MAX_DOMAIN_WIDTH:
            findings.append(Finding("domain-width",
                                    f"domain of {d.name!r} wider than {MAX_DOMAIN_WIDTH}", d.line))
    _check_block(program.body, program.sym_names(), program.sym_names(), nprocs, findings)
    return findings


# ---------------------------------------------------------------------------
# Pretty printer
# ---------------------------------------------------------------------------

_PREC = {"||": 1, "&&": 2, "==": 3, "!=": 3, "<": 4, "<=": 4, ">": 4, ">=": 4,
         "+": 5, "-": 5, "*": 6}
_UNARY_PREC = 7


def expr_source(e: Expr) -> str:
    return _render(e, 0)


def _render(e: Expr, outer: int) -> str:
    if isinstance(e, Num):
        return str(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Rank):
        return "rank"
    if isinstance(e, Nprocs):
        return "nprocs"
    if isinstance(e, Unary):
        text = f"{e.op}{_render(e.operand, _UNARY_PREC)}"
        return f"({text})" if outer > _UNARY_PREC else text
    prec = _PREC[e.op]
    text = f"{_render(e.left, prec)} {e.op} {_render(e.right, prec + 1)}"
    return f"({text})" if outer > prec else text


def _stmt_lines(st: Stmt, indent: str, out: list):
    if isinstance(st, Assign):
        out.append(f"{indent}{st.var} = {expr_source(st.expr)};")
    elif isinstance(st, If):
        out.append(f"{indent}if ({expr_source(st.cond)}) {{")
        for s in st.then_body:
            _stmt_lines(s, indent + "  ", out)
        if st.else_body:
            out.append(f"{indent}}} else {{")
            for s in st.else_body:
                _stmt_lines(s, indent + "  ", out)
        out.append(f"{indent}}}")
    elif isinstance(st, Send):
        out.append(f"{indent}send {expr_source(st.payload)} to {expr_source(st.dest)};")
    elif isinstance(st, Recv):
        src = "any" if st.src is None else expr_source(st.src)
        out.append(f"{indent}recv {st.var} from {src};")
    elif isinstance(st, Barrier):
        out.append(f"{indent}barrier;")
    elif isinstance(st, Assert):
        out.append(f"{indent}assert ({expr_source(st.cond)});")
    elif isinstance(st, Exit):
        out.append(f"{indent}exit;")
    else:  # pragma: no cover
        raise LangError(f"unknown statement {st!r}")


def pretty_print(program: Program) -> str:
    """Canonical source text; parses back to a structurally equal Program."""
    lines = []
    if program.decls:
        lines.append("symbolic")
        for d in program.decls:
            lines.append(f"sym {d.name} : int[{d.lo}..{d.hi}];")
        lines.append("")
    header = "program" if program.nprocs_default == 1 else f"program (nprocs = {program.nprocs_default})"
    if not program.body:
        lines.append(header + " {}")
    else:
        lines.append(header + " {")
        for st in program.body:
            _stmt_lines(st, "  ", lines)
        lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Concrete evaluation (used by the replayer and the full-interleaving oracle)
# ---------------------------------------------------------------------------


def eval_concrete(e: Expr, env: Mapping[str, int], rank: int, nprocs: int,
                  inputs: Mapping[str, int]):
    """Evaluate an expression to an int or bool given concrete bindings."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        if e.name in env:
            return env[e.name]
        if e.name in inputs:
            return inputs[e.name]
        raise LangError(f"unbound variable {e.name!r}")
    if isinstance(e, Rank):
        return rank
    if isinstance(e, Nprocs):
        return nprocs
    if isinstance(e, Unary):
        v = eval_concrete(e.operand, env, rank, nprocs, inputs)
        return -v if e.op == "-" else not v
    a = eval_concrete(e.left, env, rank, nprocs, inputs)
    b = eval_concrete(e.right, env, rank, nprocs, inputs)
    if e.op == "&&":
        return bool(a and b)
    if e.op == "||":
        return bool(a or b)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if e.op == "==":
        return a == b
    if e.op == "!=":
        return a != b
    if e.op == "<":
        return a < b
    if e.op == "<=":
        return a <= b
    if e.op == ">":
        return a > b
    if e.op == ">=":
        return a >= b
    raise LangError(f"unknown operator {e.op!r}")
