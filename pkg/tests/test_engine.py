import pytest

from mpisym import engine, lang, solver, symbolic
from mpisym.engine import (Deadlocked, ForkedWildcard, RunProc,
                           SearchStrategy, ValidationFailure, classify,
                           expand, scheduler, se_step, search)
from mpisym.state import (MatchEvent, Status, StepEvent, Verdict,
                          WaitRecvAny, WaitSend, init_state)
from randprog import random_program


def program(text: str) -> lang.Program:
    return lang.parse_program(text)


def run_until_blocked(s):
    """Expand while exactly one successor exists and the state is running."""
    while classify(s) is Verdict.RUNNING:
        succs = expand(s)
        if len(succs) != 1:
            return s, succs
        s = succs[0]
    return s, None


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


# -- scheduler ------------------------------------------------------------------


def test_scheduler_smallest_active():
    s = init_state(program("program (nprocs = 3) { x = rank; }"), 3)
    out = scheduler(s)
    assert out == RunProc(0, False)


def test_scheduler_prefers_candidate():
    s = init_state(program("program (nprocs = 3) { x = rank; }"), 3)
    s.next_proc_candidate = 1
    assert scheduler(s) == RunProc(1, True)
    # expand consumes the candidate
    succs = expand(s)
    assert s.next_proc_candidate is None
    assert isinstance(succs[0].trace[0], StepEvent)
    assert succs[0].trace[0].rank == 1


def test_scheduler_skips_non_active_candidate():
    p = program("program (nprocs = 3) { if (rank == 0) { recv a from 1; } }")
    s = init_state(p, 3)
    s, _ = run_until_blocked(s)  # rank 0 blocks, ranks 1/2 exit -> deadlock
    assert classify(s) is Verdict.DEADLOCK


def test_scheduler_wildcard_fork_fig1():
    p = program(FIG1)
    s = init_state(p, 3)
    # deterministic walk to the input branch of rank 1
    s, succs = run_until_blocked(s)
    assert succs is not None and len(succs) == 2  # the X != 'a' fork
    wild = succs[1]  # false side: X == 'a', wildcard receive
    wild, succs = run_until_blocked(wild)
    assert succs is not None
    out = scheduler(wild)
    assert isinstance(out, ForkedWildcard)
    assert out.pairs == ((1, 0), (1, 2))
    assert len(out.successors) == 2
    for t, (receiver, sender) in zip(out.successors, out.pairs):
        assert t.trace[-1] == MatchEvent(sender, receiver, True)


def test_scheduler_deadlock_on_exited_partner():
    p = program("program (nprocs = 2) { if (rank == 0) { recv a from 1; } }")
    s = init_state(p, 2)
    s, _ = run_until_blocked(s)
    assert classify(s) is Verdict.DEADLOCK
    assert isinstance(scheduler(s), Deadlocked)


def test_scheduler_requires_running_state():
    s = init_state(program("program {}"), 1)
    with pytest.raises(engine.EngineError):
        scheduler(s)


# -- se_step --------------------------------------------------------------------


def test_se_step_send_blocks_and_sets_candidate():
    p = program("program (nprocs = 2) { if (rank == 0) { send 7 to 1; } }")
    s = init_state(p, 2)
    s = se_step(s, 0)[0]  # branch
    t = se_step(s, 0)[0]  # send
    assert t.procs[0].status is Status.INACTIVE
    assert t.procs[0].blocked_on == WaitSend(1, symbolic.IntConst(7))
    assert t.next_proc_candidate == 1


def test_se_step_recv_matches_blocked_send():
    p = program("""\
program (nprocs = 2) {
  if (rank == 0) {
    send 7 to 1;
  } else {
    recv m from 0;
    assert (m == 7);
  }
}
""")
    rep = search(p, 2)
    assert [r.verdict for r in rep.records] == [Verdict.TERMINATED]


def test_se_step_recv_any_always_blocks():
    p = program("program (nprocs = 2) { if (rank == 0) { recv m from any; } }")
    s = init_state(p, 2)
    s = se_step(s, 0)[0]
    t = se_step(s, 0)[0]
    assert t.procs[0].blocked_on == WaitRecvAny("m")
    assert t.next_proc_candidate is None


def test_se_step_symbolic_branch_forks():
    p = program("symbolic sym X : int[0..255]; program { if (X == 97) { x = 1; } }")
    s = init_state(p, 1)
    succs = se_step(s, 0)
    assert len(succs) == 2
    x = symbolic.SymRef("X")
    assert succs[0].pc == (symbolic.binary("==", x, symbolic.IntConst(97)),)
    assert succs[1].pc == (symbolic.binary("!=", x, symbolic.IntConst(97)),)


def test_se_step_infeasible_branch_not_explored():
    p = program("""\
symbolic
sym X : int[0..255];
program {
  if (X < 100) {
    if (X >= 100) {
      x = 1;
    }
  }
}
""")
    rep = search(p, 1)
    assert len(rep.records) == 2  # X<100 (inner branch only false side), X>=100
    assert all(r.verdict is Verdict.TERMINATED for r in rep.records)


def test_se_step_barrier_counts_all_ranks():
    p = program("program (nprocs = 3) { barrier; }")
    s = init_state(p, 3)
    s = se_step(s, 0)[0]
    assert s.barrier_pending == {1, 2}
    s = se_step(s, 1)[0]
    assert s.barrier_pending == {2}
    t = se_step(s, 2)[0]
    assert t.barrier_pending == set()
    assert t.all_exited()
    from mpisym.state import BarrierRelease
    assert BarrierRelease(0) in t.trace


def test_se_step_barrier_single_process():
    p = program("program { barrier; x = 1; }")
    rep = search(p, 1)
    assert [r.verdict for r in rep.records] == [Verdict.TERMINATED]


def test_missing_barrier_participant_deadlocks():
    p = program("program (nprocs = 2) { if (rank == 0) { barrier; } }")
    rep = search(p, 2)
    assert [r.verdict for r in rep.records] == [Verdict.DEADLOCK]


def test_se_step_assert_forks_failure_witness():
    p = program("symbolic sym X : int[0..255]; program { assert (X < 100); }")
    rep = search(p, 1)
    verdicts = {r.verdict for r in rep.records}
    assert verdicts == {Verdict.TERMINATED, Verdict.ASSERT_FAIL}
    fail = rep.by_verdict(Verdict.ASSERT_FAIL)[0]
    assert fail.model == {"X": 100}  # smallest failing witness
    assert fail.fail_loc is not None


def test_se_step_concrete_assert():
    rep = search(program("program { assert (1 < 2); }"), 1)
    assert [r.verdict for r in rep.records] == [Verdict.TERMINATED]
    rep = search(program("program { assert (2 < 1); }"), 1)
    assert [r.verdict for r in rep.records] == [Verdict.ASSERT_FAIL]


def test_explicit_exit_stops_process():
    p = program("program { exit; }")
    rep = search(p, 1)
    assert [r.verdict for r in rep.records] == [Verdict.TERMINATED]


def test_unresolvable_destination_is_error_path():
    p = program("symbolic sym X : int[0..1]; program (nprocs = 2) { send 1 to X; }")
    rep = search(p, 2)
    assert [r.verdict for r in rep.records] == [Verdict.ERROR]
    assert "not constant" in rep.records[0].error


def test_entailed_destination_is_resolved():
    p = program("""\
symbolic
sym X : int[0..1];
program (nprocs = 2) {
  if (rank == 0) {
    if (X == 1) {
      send 5 to X;
    }
  } else {
    if (X == 1) {
      recv m from 0;
    }
  }
}
""")
    rep = search(p, 2)
    assert sorted(r.verdict.value for r in rep.records) == ["terminated", "terminated"]


def test_self_send_is_error():
    p = program("program (nprocs = 2) { send 1 to rank; }")
    rep = search(p, 2)
    assert all(r.verdict is Verdict.ERROR for r in rep.records)


# -- classify -------------------------------------------------------------------


def test_classify_cases():
    s = init_state(program("program {}"), 1)
    assert classify(s) is Verdict.TERMINATED
    t = init_state(program("program (nprocs = 2) { x = 1; }"), 2)
    assert classify(t) is Verdict.RUNNING


# -- search: the motivating example and rewriting counterexamples ----------------


def test_search_fig1_three_paths(corpus_entries):
    e = corpus_entries["fig1-motivating"]
    rep = search(e.program(), 3)
    assert len(rep.records) == 3
    domains = solver.domains_of(e.program())
    x = symbolic.SymRef("X")
    is97 = symbolic.binary("==", x, symbolic.IntConst(97))
    not97 = symbolic.binary("!=", x, symbolic.IntConst(97))

    def entails(pc, cond):
        return not solver.is_sat(pc + (symbolic.negate(cond),), domains)

    t1, t2, dl = rep.records
    assert t1.verdict is Verdict.TERMINATED and entails(t1.pc, not97)
    assert t2.verdict is Verdict.TERMINATED and entails(t2.pc, is97)
    assert MatchEvent(0, 1, True) in t2.trace
    assert dl.verdict is Verdict.DEADLOCK and entails(dl.pc, is97)
    assert MatchEvent(2, 1, True) in dl.trace


def test_search_fig4a_no_false_deadlock(corpus_entries):
    rep = search(corpus_entries["fig4a-blind"].program(), 3)
    assert rep.by_verdict(Verdict.DEADLOCK) == []
    assert len(rep.by_verdict(Verdict.TERMINATED)) == len(rep.records) == 1


def test_search_fig4b_both_outcomes(corpus_entries):
    rep = search(corpus_entries["fig4b-eager"].program(), 3)
    deadlocks = rep.by_verdict(Verdict.DEADLOCK)
    assert len(deadlocks) == 1
    assert MatchEvent(2, 0, True) in deadlocks[0].trace
    assert len(rep.by_verdict(Verdict.TERMINATED)) == 1


def test_search_fig6_multi_wildcard(corpus_entries):
    rep = search(corpus_entries["fig6-multi-wildcard"].program(), 4)
    assert len(rep.by_verdict(Verdict.DEADLOCK)) >= 1
    assert len(rep.by_verdict(Verdict.TERMINATED)) >= 1


def test_search_validates_first():
    p = program("program (nprocs = 2) { send 1 to 9; }")
    with pytest.raises(ValidationFailure):
        search(p, 2)


def test_search_deterministic(corpus_entries):
    e = corpus_entries["fig6-multi-wildcard"]

    def fingerprint(rep):
        return [(r.verdict, r.pc, tuple(sorted(r.model.items())), r.trace)
                for r in rep.records]

    a = search(e.program(), 4)
    b = search(e.program(), 4)
    assert fingerprint(a) == fingerprint(b)
    assert a.states_created == b.states_created
    assert a.solver_queries == b.solver_queries


def test_search_bfs_same_verdict_multiset(corpus_entries):
    for name in ("fig1-motivating", "fig4b-eager", "recv-any-deadlock"):
        e = corpus_entries[name]
        dfs = search(e.program(), e.nprocs, SearchStrategy(order="dfs"))
        bfs = search(e.program(), e.nprocs, SearchStrategy(order="bfs"))
        assert sorted(r.verdict.value for r in dfs.records) == \
            sorted(r.verdict.value for r in bfs.records)


def test_search_max_states_truncates(corpus_entries):
    e = corpus_entries["fig1-motivating"]
    rep = search(e.program(), 3, SearchStrategy(max_states=4))
    assert rep.truncated


def test_search_max_depth_truncates(corpus_entries):
    e = corpus_entries["fig1-motivating"]
    rep = search(e.program(), 3, SearchStrategy(max_depth=3))
    assert rep.truncated
    full = search(e.program(), 3)
    assert not full.truncated


def test_search_pinned_model_restricts_paths(corpus_entries):
    e = corpus_entries["fig1-motivating"]
    rep = search(e.program(), 3, pin_model={"X": 0})
    assert [r.verdict for r in rep.records] == [Verdict.TERMINATED]
    rep97 = search(e.program(), 3, pin_model={"X": 97})
    assert sorted(r.verdict.value for r in rep97.records) == ["deadlock", "terminated"]


def test_every_model_satisfies_its_path_condition(corpus_entries, rng):
    programs = [e.program() for e in corpus_entries.values()]
    nprocs = [e.nprocs for e in corpus_entries.values()]
    for _ in range(10):
        programs.append(random_program(rng))
        nprocs.append(programs[-1].nprocs_default)
    for p, n in zip(programs, nprocs):
        for rec in search(p, n).records:
            assert symbolic.pc_holds(rec.pc, rec.model)


def test_sat_only_worklist(corpus_entries, rng, monkeypatch):
    """Every state the engine ever expands has a satisfiable PC."""
    import mpisym.engine as engine_mod
    original = engine_mod.classify
    checked = []

    def checking_classify(s):
        assert solver.is_sat(s.pc, s.compiled.domains)
        checked.append(1)
        return original(s)

    monkeypatch.setattr(engine_mod, "classify", checking_classify)
    e = corpus_entries["fig1-motivating"]
    search(e.program(), 3)
    for _ in range(15):
        p = random_program(rng)
        search(p, p.nprocs_default)
    assert checked
