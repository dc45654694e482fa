import shutil

import pytest

from mpisym import cli, corpus


@pytest.fixture()
def fig1_path(tmp_path, corpus_entries):
    path = tmp_path / "fig1-motivating.mpisym"
    path.write_text(corpus_entries["fig1-motivating"].source)
    return path


def run(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_analyze_deadlock_exit_code(capsys, fig1_path, tmp_path):
    out_dir = tmp_path / "cases"
    code, out, _ = run(capsys, "analyze", str(fig1_path), "--nprocs", "3",
                       "--out", str(out_dir))
    assert code == 2
    assert out.startswith("paths=3 terminated=2 deadlock=1")
    cases = sorted(out_dir.glob("*.testcase"))
    assert len(cases) == 3


def test_analyze_clean_program_exits_zero(capsys, tmp_path, corpus_entries):
    path = tmp_path / "fig4a-blind.mpisym"
    path.write_text(corpus_entries["fig4a-blind"].source)
    code, out, _ = run(capsys, "analyze", str(path), "--nprocs", "3")
    assert code == 0
    assert "deadlock" not in out.splitlines()[0]


def test_analyze_syntax_error_exits_one(capsys, tmp_path):
    path = tmp_path / "broken.mpisym"
    path.write_text("program { x = ; }")
    code, _, err = run(capsys, "analyze", str(path))
    assert code == 1
    assert "expected an expression" in err


def test_analyze_validation_failure_exits_one(capsys, tmp_path):
    path = tmp_path / "invalid.mpisym"
    path.write_text("program (nprocs = 2) { send 1 to 7; }")
    code, _, err = run(capsys, "analyze", str(path))
    assert code == 1
    assert "rank-range" in err


def test_analyze_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "analyze", str(tmp_path / "nope.mpisym"))
    assert code == 1


def test_analyze_nprocs_override(capsys, tmp_path):
    # under 2 processes the send is out of range: validation must gate it
    path = tmp_path / "p.mpisym"
    path.write_text("program (nprocs = 3) {\n"
                    "  if (rank == 0) { send 1 to 2; }\n"
                    "  else { if (rank == 2) { recv m from 0; } }\n"
                    "}\n")
    code, _, _ = run(capsys, "analyze", str(path))
    assert code == 0
    code2, _, err = run(capsys, "analyze", str(path), "--nprocs", "2")
    assert code2 == 1 and "rank-range" in err


def test_analyze_verbose_detail(capsys, fig1_path):
    code, out, _ = run(capsys, "analyze", str(fig1_path), "-v")
    assert code == 2
    assert "pc: [X == 97]" in out
    assert "match 2->1 (any)" in out


def test_replay_round_trip(capsys, fig1_path, tmp_path):
    out_dir = tmp_path / "cases"
    run(capsys, "analyze", str(fig1_path), "--out", str(out_dir))
    for case in sorted(out_dir.glob("*.testcase")):
        code, out, _ = run(capsys, "replay", str(fig1_path), str(case))
        assert code == 0
        assert "reproduced; 0 divergences" in out


def test_replay_edited_program_hash_mismatch(capsys, fig1_path, tmp_path, corpus_entries):
    out_dir = tmp_path / "cases"
    run(capsys, "analyze", str(fig1_path), "--out", str(out_dir))
    case = sorted(out_dir.glob("*.testcase"))[0]
    edited = tmp_path / "edited.mpisym"
    edited.write_text(corpus_entries["fig1-motivating"].source.replace("x = 0", "x = 1"))
    code, _, err = run(capsys, "replay", str(edited), str(case))
    assert code == 1
    assert "hash mismatch" in err


def test_compare_fig6(capsys, tmp_path, corpus_entries):
    path = tmp_path / "fig6.mpisym"
    path.write_text(corpus_entries["fig6-multi-wildcard"].source)
    code, out, _ = run(capsys, "compare", str(path), "--nprocs", "4")
    assert code == 0
    assert "THEOREM-CHECK PASS" in out


def test_compare_set_model(capsys, fig1_path):
    code, out, _ = run(capsys, "compare", str(fig1_path), "--set", "X=97")
    assert code == 0
    assert "THEOREM-CHECK PASS model={X=97}" in out
    code0, out0, _ = run(capsys, "compare", str(fig1_path), "--set", "X=0")
    assert code0 == 0
    assert "engine-deadlocks=0 oracle-deadlocks=0" in out0


def test_compare_enumerate_models_covers_branches(capsys, fig1_path):
    code, out, _ = run(capsys, "compare", str(fig1_path), "--enumerate-models", "4")
    assert code == 0
    assert "model={X=97}" in out  # a path witness, not just 0..3
    assert out.count("THEOREM-CHECK PASS") == 4


def test_compare_bad_set_value(capsys, fig1_path):
    code, _, err = run(capsys, "compare", str(fig1_path), "--set", "Y=1")
    assert code == 1
    assert "undeclared" in err


def test_compare_oracle_bound_exit(capsys, tmp_path):
    path = tmp_path / "wide.mpisym"
    path.write_text("program (nprocs = 4) { barrier; barrier; }")
    code, _, err = run(capsys, "compare", str(path), "--oracle-bound", "2")
    assert code == 3
    assert "bound" in err


def test_corpus_command(capsys):
    code, out, _ = run(capsys, "corpus")
    assert code == 0
    assert "all 14 corpus entries match" in out


def test_corpus_flipped_expectation_fixture(capsys, tmp_path):
    src = corpus.bundled_dir()
    for f in src.iterdir():
        shutil.copy(f, tmp_path / f.name)
    manifest = tmp_path / "manifest"
    flipped = manifest.read_text().replace(
        "fig4a-blind 3 no no", "fig4a-blind 3 yes no")
    manifest.write_text(flipped)
    code, out, _ = run(capsys, "corpus", "--dir", str(tmp_path))
    assert code == 2
    assert "MISMATCH" in out


def test_corpus_empty_dir(capsys, tmp_path):
    code, _, err = run(capsys, "corpus", "--dir", str(tmp_path))
    assert code == 1


def test_usage_error_exit_code(capsys):
    assert cli.main(["analyze"]) == 1  # missing positional
    assert cli.main(["frobnicate"]) == 1
