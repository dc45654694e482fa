"""Command-line front end.

Subcommands: analyze (explore all paths, optionally writing one replayable
test case per path), replay (re-execute a recorded test case), compare
(differential check of the reduced engine against the full-interleaving
explorer), corpus (run the bundled expectations table).

Exit codes: 0 clean, 1 usage/analysis error, 2 deadlock or assertion
failure found (analyze) / expectation mismatch (corpus, compare FAIL),
3 explorer state bound exceeded (compare).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import corpus as corpus_mod
from . import engine, lang, oracle, replay, report, solver
from .state import Verdict

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FOUND = 2
EXIT_BOUND = 3


def _fail(message: str) -> int:
    print(f"mpisym: error: {message}", file=sys.stderr)
    return EXIT_USAGE


def _load_program(path_text: str):
    path = Path(path_text)
    try:
        source = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise lang.LangError(f"cannot read {path}: {exc.strerror}") from exc
    return lang.parse_program(source)


def _strategy(args) -> engine.SearchStrategy:
    return engine.SearchStrategy(order=args.strategy, max_states=args.max_states,
                                 max_depth=args.max_depth)


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("program", help="program source file")
    parser.add_argument("--nprocs", type=int, default=None,
                        help="process count (defaults to the program header)")
    parser.add_argument("--strategy", choices=("dfs", "bfs"), default="dfs")
    parser.add_argument("--max-states", type=int, default=None)
    parser.add_argument("--max-depth", type=int, default=None)
    parser.add_argument("-v", "--verbose", action="count", default=0)


def cmd_analyze(args) -> int:
    try:
        program = _load_program(args.program)
        nprocs = args.nprocs if args.nprocs is not None else program.nprocs_default
        result = engine.search(program, nprocs, _strategy(args))
    except engine.ValidationFailure as exc:
        sys.stderr.write(report.render_validation(exc.findings))
        return EXIT_USAGE
    except (lang.LangError, ValueError) as exc:
        return _fail(str(exc))

    sys.stdout.write(report.render(result, detail=args.verbose))

    if args.out is not None:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = Path(args.program).stem
        written = 0
        for rec in result.records:
            if rec.verdict is Verdict.ERROR:
                print(f"mpisym: path {rec.index + 1} is an analysis error; "
                      "no test case written", file=sys.stderr)
                continue
            target = out_dir / f"{stem}.path{rec.index + 1:03d}.testcase"
            replay.save_testcase(rec, program, nprocs, target)
            written += 1
        print(f"wrote {written} test case(s) to {out_dir}")

    counts = result.counts
    if counts.get("deadlock", 0) or counts.get("assertfail", 0):
        return EXIT_FOUND
    if counts.get("error", 0):
        return _fail("some paths could not be analyzed (see report)")
    return EXIT_OK


def cmd_replay(args) -> int:
    try:
        program = _load_program(args.program)
        tc = replay.load_testcase(args.testcase)
        result = replay.replay_testcase(program, tc)
    except (lang.LangError, replay.ReplayError, OSError, ValueError) as exc:
        return _fail(str(exc))

    expected = tc.verdict.value
    if result.ok:
        print(f"{expected.capitalize()} reproduced; 0 divergences")
        return EXIT_OK
    observed = result.verdict.value if result.verdict is not None else "none"
    print(f"replay failed: expected {expected}, observed {observed}")
    for d in result.divergences:
        print(f"  divergence at {d}")
    return EXIT_USAGE


def _parse_set(pairs, program) -> dict:
    domains = solver.domains_of(program)
    model = {}
    for pair in pairs:
        if "=" not in pair:
            raise lang.LangError(f"--set needs NAME=VALUE, got {pair!r}")
        name, value_text = pair.split("=", 1)
        name = name.strip()
        if name not in domains:
            raise lang.LangError(f"--set names undeclared input {name!r}")
        model[name] = int(value_text)
    missing = [n for n in domains if n not in model]
    if missing:
        raise lang.LangError(f"--set must assign every input; missing {missing}")
    return model


def _candidate_models(program, nprocs, count: int):
    """Models to compare under: the witness model of each engine path (they
    cover every explored branch shape), topped up lexicographically."""
    domains = solver.domains_of(program)
    result = engine.search(program, nprocs)
    models = []
    seen = set()
    for rec in result.records:
        key = tuple(sorted(rec.model.items()))
        if key not in seen:
            seen.add(key)
            models.append(rec.model)
        if len(models) >= count:
            return models
    for extra in solver.enumerate_models((), domains, count):
        key = tuple(sorted(extra.items()))
        if key not in seen:
            seen.add(key)
            models.append(extra)
        if len(models) >= count:
            break
    return models


def cmd_compare(args) -> int:
    try:
        program = _load_program(args.program)
        nprocs = args.nprocs if args.nprocs is not None else program.nprocs_default
        findings = lang.validate(program, nprocs)
        if findings:
            sys.stderr.write(report.render_validation(findings))
            return EXIT_USAGE
        if args.set:
            models = [_parse_set(args.set, program)]
        else:
            models = _candidate_models(program, nprocs, args.enumerate_models)
    except engine.ValidationFailure as exc:
        sys.stderr.write(report.render_validation(exc.findings))
        return EXIT_USAGE
    except (lang.LangError, solver.SolverError, ValueError) as exc:
        return _fail(str(exc))

    all_hold = True
    try:
        for model in models:
            verdict = oracle.check_theorem(program, nprocs, model,
                                           state_bound=args.oracle_bound)
            sys.stdout.write(report.render_compare(verdict))
            all_hold = all_hold and verdict.holds
    except oracle.BoundExceeded as exc:
        print(f"mpisym: {exc}", file=sys.stderr)
        return EXIT_BOUND
    except oracle.OracleError as exc:
        return _fail(str(exc))
    return EXIT_OK if all_hold else EXIT_FOUND


def cmd_corpus(args) -> int:
    directory = Path(args.dir) if args.dir is not None else None
    try:
        entries = corpus_mod.load_corpus(directory)
    except corpus_mod.CorpusError as exc:
        return _fail(str(exc))

    mismatches = 0
    for e in entries:
        result = engine.search(e.program(), e.nprocs, _strategy_defaults(args))
        got_deadlock = bool(result.counts.get("deadlock", 0))
        got_assert = bool(result.counts.get("assertfail", 0))
        ok = (got_deadlock == e.deadlock_reachable
              and got_assert == e.assertfail_reachable)
        mismatches += 0 if ok else 1
        print(f"{e.name:24s} nprocs={e.nprocs} paths={len(result.records):3d} "
              f"deadlock={'yes' if got_deadlock else 'no':3s} "
              f"assertfail={'yes' if got_assert else 'no':3s} "
              f"[{'ok' if ok else 'MISMATCH'}]")
    if mismatches:
        print(f"{mismatches} corpus mismatch(es)")
        return EXIT_FOUND
    print(f"all {len(entries)} corpus entries match")
    return EXIT_OK


def _strategy_defaults(args) -> engine.SearchStrategy:
    return engine.SearchStrategy(max_states=args.max_states, max_depth=args.max_depth)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mpisym",
        description="Symbolic execution and deadlock detection for a small "
                    "synchronous message-passing language.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_analyze = sub.add_parser("analyze", help="explore all paths of a program")
    _add_common(p_analyze)
    p_analyze.add_argument("--out", default=None,
                           help="directory for one replayable test case per path")
    p_analyze.set_defaults(func=cmd_analyze)

    p_replay = sub.add_parser("replay", help="re-execute a recorded test case")
    p_replay.add_argument("program")
    p_replay.add_argument("testcase")
    p_replay.add_argument("-v", "--verbose", action="count", default=0)
    p_replay.set_defaults(func=cmd_replay)

    p_compare = sub.add_parser(
        "compare", help="check the engine against the full-interleaving explorer")
    _add_common(p_compare)
    p_compare.add_argument("--set", action="append", default=[],
                           metavar="NAME=VALUE",
                           help="pin a symbolic input (repeatable)")
    p_compare.add_argument("--enumerate-models", type=int, default=4, metavar="K",
                           help="number of solver models to compare under")
    p_compare.add_argument("--oracle-bound", type=int, default=200_000)
    p_compare.set_defaults(func=cmd_compare)

    p_corpus = sub.add_parser("corpus", help="run the bundled expectation table")
    p_corpus.add_argument("--dir", default=None,
                          help="corpus directory (defaults to the bundled one)")
    p_corpus.add_argument("--max-states", type=int, default=None)
    p_corpus.add_argument("--max-depth", type=int, default=None)
    p_corpus.add_argument("-v", "--verbose", action="count", default=0)
    p_corpus.set_defaults(func=cmd_corpus)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage problems; fold into the tool's contract
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except lang.ParseError as exc:
        return _fail(str(exc))


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
