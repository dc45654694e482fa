import os
import random

import pytest

from mpisym import corpus


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running differential suites")


@pytest.fixture(scope="session")
def corpus_entries():
    return {e.name: e for e in corpus.load_corpus()}


@pytest.fixture(scope="session")
def seed():
    return int(os.environ.get("MPISYM_SEED", "1729"))


@pytest.fixture()
def rng(seed):
    return random.Random(seed)
