from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings
from scipy import sparse

from graphschrod import FiniteGraph

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

DATA = Path(__file__).parent / "data"


def random_graph(rng, n, p=0.3, b_max=10.0, mu_range=(0.1, 10.0), connected=True):
    """Random finite graph with b in (0, b_max] and mu in mu_range."""
    mask = np.triu(rng.random((n, n)) < p, k=1)
    if connected:
        idx = np.arange(n - 1)
        mask[idx, idx + 1] = True
    i, j = np.nonzero(mask)
    w = b_max * (1.0 - rng.random(i.size))
    adj = sparse.coo_matrix((np.r_[w, w], (np.r_[i, j], np.r_[j, i])), shape=(n, n))
    mu = rng.uniform(*mu_range, size=n)
    return FiniteGraph(adj, mu)


def dense_operator(g, V, S=None):
    """Oracle: the section of L_V as a plain dense matrix in vertex coordinates."""
    S = list(g.vertices()) if S is None else list(S)
    n = len(S)
    A = np.zeros((n, n))
    for a, x in enumerate(S):
        A[a, a] = g.deg(x) / g.mu(x) + V(x)
        for c, y in enumerate(S):
            if c != a:
                A[a, c] = -g.b(x, y) / g.mu(x)
    return A


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: dict = {}


def record_criterion(number: int, passed: bool, text: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {text}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
