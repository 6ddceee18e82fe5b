import numpy as np
import pytest

from robust_tr.tr import random_cores


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def make_cores(rng, dims, ranks, scale=1.0):
    return random_cores(dims, ranks, rng, scale)


def random_instance(rng, max_order=5, max_dim=6, max_rank=3, min_order=3):
    N = int(rng.integers(min_order, max_order + 1))
    dims = [int(d) for d in rng.integers(1, max_dim + 1, size=N)]
    ranks = [int(r) for r in rng.integers(1, max_rank + 1, size=N)]
    return make_cores(rng, dims, ranks)


#: (criterion number, line) pairs filled by the acceptance module.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
