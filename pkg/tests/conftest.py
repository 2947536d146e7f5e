import numpy as np
import pytest

from cgmatch import SimilarityMatrix


def sim_from_upper(n, entries):
    """Build a symmetric similarity matrix from {(i, j): value} upper-triangle pairs."""
    m = np.zeros((n, n), dtype=np.float64)
    for (i, j), v in entries.items():
        m[i, j] = v
        m[j, i] = v
    return SimilarityMatrix(m)


CASE1 = {
    (0, 1): 0.4,
    (0, 2): 0.1,
    (0, 3): 0.5,
    (1, 2): 0.6,
    (1, 3): 0.2,
    (2, 3): 0.3,
}

# complement of case1: every off-diagonal entry is 1 - the case1 entry
CASE2 = {k: round(1.0 - v, 10) for k, v in CASE1.items()}


@pytest.fixture
def case1():
    return sim_from_upper(4, CASE1)


@pytest.fixture
def case2():
    return sim_from_upper(4, CASE2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
