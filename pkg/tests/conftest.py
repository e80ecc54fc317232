import numpy as np
import pytest

from covsched.constraints import ConstraintSet, build_occupancy_band
from covsched.graph import ContactGraph
from covsched.infection import EpidemicParams
from covsched.problem import Problem


def tiny_instance(seed, model="M1", pr_test=0.0, n_range=(3, 7), days=(2, 4), cap=1):
    """Random oracle-sized instance: occupancy band [50%, 100%], test cap ``cap``."""
    rng = np.random.default_rng(1000 + seed)
    n = int(rng.integers(*n_range))
    D = int(rng.integers(*days))
    w = np.where(rng.random((n, n)) < 0.6, np.round(rng.uniform(0.1, 1, (n, n)), 1), 0.0)
    w = np.triu(w, 1)
    w = w + w.T
    g = ContactGraph(w, rng.random(n) < 0.5)
    p = EpidemicParams(horizon=D)
    lo, hi = build_occupancy_band(n, 0.5, 1.0)
    cs = ConstraintSet(n, [lo], [hi], 0, cap)
    return Problem(g, p, cs, model, pr_test=pr_test)


def random_graph(rng, n, density=0.5, vaccinated=0.5):
    w = np.where(rng.random((n, n)) < density, rng.random((n, n)), 0.0)
    w = np.triu(w, 1)
    return ContactGraph(w + w.T, rng.random(n) < vaccinated)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
