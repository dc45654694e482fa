import pytest

from mpisym import corpus, lang
from mpisym.corpus import CorpusError, load_corpus


REQUIRED = {
    "fig1-motivating", "fig4a-blind", "fig4b-eager", "fig6-multi-wildcard",
    "barrier-deadlock", "head-to-head", "rr-deadlock", "recv-any-deadlock",
    "cond-bcast", "collect-misorder", "waitall-deadlock",
}


def test_bundle_has_required_entries(corpus_entries):
    assert len(corpus_entries) >= 12
    assert REQUIRED <= set(corpus_entries)
    controls = [e for e in corpus_entries.values()
                if not e.deadlock_reachable and not e.assertfail_reachable]
    assert len(controls) >= 2


def test_expectations(corpus_entries):
    assert corpus_entries["fig1-motivating"].deadlock_reachable
    assert not corpus_entries["fig4a-blind"].deadlock_reachable
    assert corpus_entries["head-to-head"].deadlock_reachable
    assert corpus_entries["assert-payload"].assertfail_reachable


def test_every_entry_validates(corpus_entries):
    for e in corpus_entries.values():
        assert lang.validate(e.program(), e.nprocs) == [], e.name


def test_entry_lookup():
    e = corpus.entry("fig1-motivating")
    assert e.nprocs == 3
    with pytest.raises(CorpusError):
        corpus.entry("no-such-entry")


def test_empty_directory_is_corrupt(tmp_path):
    with pytest.raises(CorpusError):
        load_corpus(tmp_path)
    (tmp_path / "manifest").write_text("# nothing\n")
    with pytest.raises(CorpusError):
        load_corpus(tmp_path)


def test_missing_source_is_corrupt(tmp_path):
    (tmp_path / "manifest").write_text("ghost 2 yes no spooky\n")
    with pytest.raises(CorpusError) as err:
        load_corpus(tmp_path)
    assert "ghost" in str(err.value)


def test_invalid_program_is_corrupt(tmp_path):
    (tmp_path / "manifest").write_text("bad 2 no no broken\n")
    (tmp_path / "bad.mpisym").write_text("program (nprocs = 2) { send 1 to 9; }\n")
    with pytest.raises(CorpusError) as err:
        load_corpus(tmp_path)
    assert "validation" in str(err.value)
