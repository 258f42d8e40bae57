import sys

import numpy as np
import pytest
from hypothesis import settings

from randers_sphere.skew import SkewGenerator

settings.register_profile("repo", max_examples=40, deadline=None, derandomize=True)
settings.load_profile("repo")


def random_admissible(rng, dim, max_rate=0.9):
    """Random skew generator with all rotation rates below max_rate."""
    A = rng.standard_normal((dim, dim))
    M = A - A.T
    rates = np.abs(np.linalg.eigvals(M).imag).max()
    scale = rng.uniform(0.05, max_rate) / rates if rates > 0 else 0.0
    return SkewGenerator(M * scale)


def random_sphere(rng, m, dim):
    X = rng.standard_normal((m, dim))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance-criterion lines collected by test_acceptance."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(lines):
        terminalreporter.write_line(lines[key])
