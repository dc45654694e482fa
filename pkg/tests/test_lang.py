import pytest

from mpisym import lang
from mpisym.lang import (Assign, Barrier, Binary, If, Num, ParseError, Recv,
                         Send, parse_program, pretty_print, validate)


FIG1 = """\
symbolic
sym X : int[0..255];

program (nprocs = 3) {
  if (rank == 0) {
    x = 0;
    send x to 1;
  } else {
    if (rank == 1) {
      if (X != 'a') {
        recv x from 0;
      } else {
        recv x from any;
      }
      recv y from 2;
    } else {
      x = 20;
      send x to 1;
    }
  }
}
"""


def test_parse_motivating_example():
    p = parse_program(FIG1)
    assert p.nprocs_default == 3
    assert [d.name for d in p.decls] == ["X"]
    assert p.decls[0].lo == 0 and p.decls[0].hi == 255
    top = p.body[0]
    assert isinstance(top, If)
    rank1 = top.else_body[0]
    inner = rank1.then_body[0]
    # the wildcard receive sits under the else side of the input test
    assert isinstance(inner, If)
    assert isinstance(inner.else_body[0], Recv) and inner.else_body[0].src is None
    assert isinstance(inner.then_body[0], Recv) and inner.then_body[0].src == Num(0)


def test_char_literal_is_code_point():
    p = parse_program("program { x = 'a'; }")
    assert p.body[0] == Assign("x", Num(97))


def test_empty_program():
    p = parse_program("program {}")
    assert p.body == ()
    assert p.decls == ()
    assert p.nprocs_default == 1


def test_expression_destination():
    p = parse_program("program (nprocs = 2) { send 1 to rank + 1; }")
    send = p.body[0]
    assert isinstance(send, Send)
    assert send.dest == Binary("+", lang.RANK, Num(1))


def test_repeat_splices_copies():
    p = parse_program("program (nprocs = 2) { repeat 3 { barrier; } }")
    assert p.body == (Barrier(), Barrier(), Barrier())
    q = parse_program("program (nprocs = 2) { repeat 0 { barrier; } }")
    assert q.body == ()


def test_precedence():
    p = parse_program("program { x = 1 + 2 * 3; y = x; }")
    assert p.body[0].expr == Binary("+", Num(1), Binary("*", Num(2), Num(3)))
    q = parse_program("program { x = 1; z = x < 3 && x != 2 || x == 9; }")
    e = q.body[1].expr
    assert e.op == "||"
    assert e.left.op == "&&"


def test_comments_and_locations():
    p = parse_program("# leading comment\nprogram {\n  x = 1; # trailing\n}\n")
    assert p.body[0].line == 3


@pytest.mark.parametrize("source,fragment", [
    ("program { x = ; }", "expected an expression"),
    ("program { if x { } }", "expected '('"),
    ("sym X : int[0..3]; program {}", "must follow a 'symbolic' header"),
    ("symbolic sym X : int[0..2]; sym X : int[0..2]; program {}", "duplicate symbolic"),
    ("program { rank = 3; }", "reserved name"),
    ("program { recv rank from 0; }", "reserved name"),
    ("symbolic sym send : int[0..2]; program {}", "reserved name"),
    ("program (nprocs = 0) {}", "positive"),
])
def test_parse_errors(source, fragment):
    with pytest.raises(ParseError) as err:
        parse_program(source)
    assert fragment in str(err.value)


def test_parse_error_carries_location():
    with pytest.raises(ParseError) as err:
        parse_program("program {\n  x = @;\n}")
    assert err.value.line == 2


# -- validation ---------------------------------------------------------------


def test_validate_motivating_example_clean():
    assert validate(parse_program(FIG1), 3) == []


def test_validate_out_of_range_literal():
    p = parse_program("program (nprocs = 3) { send 1 to 5; }")
    findings = validate(p, 3)
    assert [f.kind for f in findings] == ["rank-range"]
    # same program under more processes is fine
    assert validate(p, 6) == []


def test_validate_use_before_assign():
    p = parse_program("program { x = y + 1; }")
    assert any(f.kind == "use-before-assign" for f in validate(p, 1))


def test_validate_join_of_branches():
    # defined only on one side of the branch: flagged at the later use
    p = parse_program("program { if (rank == 0) { v = 1; } x = v; }")
    assert any(f.kind == "use-before-assign" for f in validate(p, 2))
    # defined on both sides: clean
    q = parse_program(
        "program { if (rank == 0) { v = 1; } else { v = 2; } x = v; }")
    assert validate(q, 2) == []


def test_validate_recv_defines_variable():
    p = parse_program("program (nprocs = 2) { recv m from 0; x = m; }")
    assert validate(p, 2) == []


def test_validate_exit_makes_tail_unreachable():
    p = parse_program("program { exit; x = y; }")
    assert validate(p, 1) == []


def test_validate_empty_domain():
    p = parse_program("symbolic sym X : int[9..3]; program {}")
    assert any(f.kind == "empty-domain" for f in validate(p, 1))


def test_validate_assign_to_symbolic_input():
    p = parse_program("symbolic sym X : int[0..3]; program { X = 1; }")
    assert any(f.kind == "assign-symbolic" for f in validate(p, 1))


def test_validate_type_errors():
    p = parse_program("program { x = 1 < 2; }")
    assert any(f.kind == "type" for f in validate(p, 1))
    q = parse_program("program { x = 1; if (x) { } }")
    assert any(f.kind == "type" for f in validate(q, 1))


# -- pretty printing ----------------------------------------------------------


def test_pretty_print_empty_program():
    assert pretty_print(lang.Program((), 1, ())) == "program {}\n"


def test_round_trip_motivating_example():
    p = parse_program(FIG1)
    assert parse_program(pretty_print(p)) == p


def test_round_trip_corpus(corpus_entries):
    for entry in corpus_entries.values():
        p = entry.program()
        again = parse_program(pretty_print(p))
        assert again == p, entry.name


def test_round_trip_keeps_operator_structure():
    src = "program { x = 1 - (2 - 3); y = -x * 3 + (x - 1) * 2; z = x; }"
    p = parse_program(src)
    assert parse_program(pretty_print(p)) == p


def test_eval_concrete_matches_python():
    p = parse_program("program { x = (3 + 4) * 2 - 1; }")
    expr = p.body[0].expr
    assert lang.eval_concrete(expr, {}, 0, 1, {}) == 13
    assert lang.eval_concrete(lang.RANK, {}, 2, 4, {}) == 2
    assert lang.eval_concrete(lang.NPROCS, {}, 2, 4, {}) == 4
