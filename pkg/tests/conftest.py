import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from toycorpus import make_corpus  # noqa: E402


@pytest.fixture(scope="session")
def small_corpus():
    """50 toy pairs plus a ready generator suite."""
    return make_corpus(50, rng_seed=7)
