import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).parent
if str(TESTS_DIR) not in sys.path:
    sys.path.insert(0, str(TESTS_DIR))

from suitegen import build_suite  # noqa: E402

CORPUS_DIR = TESTS_DIR / "corpus"
FIXTURES_DIR = TESTS_DIR / "fixtures"


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return CORPUS_DIR


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES_DIR


@pytest.fixture(scope="session")
def suite():
    """50 problems x 10 candidates, all syntactically valid."""
    return build_suite(n_problems=50, n_candidates=10, seed=7)


@pytest.fixture(scope="session")
def small_suite():
    """Quick 10-problem suite for harness plumbing tests."""
    return build_suite(n_problems=10, n_candidates=6, seed=11)


@pytest.fixture(scope="session")
def broken_suite():
    """Suite variant that includes syntax-broken candidates."""
    return build_suite(n_problems=8, n_candidates=6, seed=3, broken_fraction=0.34)
