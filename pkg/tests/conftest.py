import numpy as np
import pytest
from hypothesis import strategies as st

from motlab.measures import DiscreteMeasure, MeasurePair, quantize

_criteria = {}


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("acceptance")
        if m is not None:
            _criteria[item.nodeid] = (m.args[0], m.kwargs.get("title", item.name))


def pytest_runtest_logreport(report):
    if report.nodeid in _criteria and (report.when == "call" or report.failed):
        n, title = _criteria[report.nodeid]
        _criteria[report.nodeid] = (n, title, report.outcome)


def pytest_terminal_summary(terminalreporter):
    done = [v for v in _criteria.values() if len(v) == 3]
    if not done:
        return
    terminalreporter.section("acceptance criteria")
    for n, title, outcome in sorted(done):
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if outcome == 'passed' else 'FAIL'}  {title}")


def random_measure(rng, max_atoms=12, scale=2.0):
    k = int(rng.integers(1, max_atoms + 1))
    return DiscreteMeasure(rng.uniform(-scale, scale, k), rng.dirichlet(np.ones(k)))


def ordered_pair(rng, max_atoms=12):
    """mu1 <= mu2 built by quantizing a common parent at nested resolutions."""
    parent = random_measure(rng, max_atoms=max_atoms)
    n2 = int(rng.choice([2, 4, 6, 8, 12]))
    n1 = int(rng.choice([d for d in (1, 2, 3, 4, 6) if n2 % d == 0]))
    return MeasurePair(quantize(parent, n1), quantize(parent, n2))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def u1():
    return DiscreteMeasure.uniform([-1, 1])


@pytest.fixture
def u2():
    return DiscreteMeasure.uniform([-2, 2])


@pytest.fixture
def qstar_mass():
    # rows x = -1, 1; columns y = -2, 2
    return np.array([[3 / 8, 1 / 8], [1 / 8, 3 / 8]])


@st.composite
def measures(draw, max_atoms=8):
    k = draw(st.integers(1, max_atoms))
    atoms = draw(st.lists(st.integers(-40, 40), min_size=k, max_size=k))
    weights = draw(st.lists(st.integers(1, 20), min_size=k, max_size=k))
    return DiscreteMeasure(np.array(atoms) / 8.0, weights)
