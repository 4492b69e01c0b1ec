import numpy as np
import pytest
from scipy.spatial.distance import cdist


def random_metric(rng, n):
    """Symmetrized i.i.d. uniform(0, 1) dissimilarities with zero diagonal."""
    a = rng.uniform(0, 1, (n, n))
    d = np.triu(a, 1)
    return d + d.T


def euclidean(x):
    d = cdist(x, x)
    return 0.5 * (d + d.T)


def regular_polygon(k, radius=1.0):
    t = 2 * np.pi * np.arange(k) / k
    return radius * np.column_stack([np.cos(t), np.sin(t)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance(request, capsys):
    """Report one acceptance criterion: prints a PASS/FAIL line, then asserts."""
    lines = request.config.stash[_ACCEPTANCE]

    def report(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append((number, line))
        with capsys.disabled():
            print(f"\n    {line}")
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
