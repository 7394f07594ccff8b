import os

# single-threaded BLAS, pinned before numpy loads
for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
            "NUMEXPR_NUM_THREADS"):
    os.environ.setdefault(var, "1")

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "deterministic",
    derandomize=True,
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("deterministic")

DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")


@pytest.fixture(scope="session")
def data_dir() -> str:
    return DATA_DIR


@pytest.fixture(scope="session")
def lexicon_path(data_dir) -> str:
    return os.path.join(data_dir, "lexicon.json")


@pytest.fixture(scope="session")
def trace_corpus_path(data_dir) -> str:
    return os.path.join(data_dir, "trace_corpus.jsonl")


@pytest.fixture(scope="session")
def golden_clues_path(data_dir) -> str:
    return os.path.join(data_dir, "golden_clues.jsonl")
