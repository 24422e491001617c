from pathlib import Path

import numpy as np
import pytest

from carloss.datasets import synthetic_counties
from carloss.sampler import PriorSpec, SamplerConfig, run_chain

DATA = Path(__file__).parent / "data"

_ACCEPTANCE_LINES = []


@pytest.fixture
def record():
    """Register a one-line acceptance verdict, printed in the terminal summary."""

    def _record(criterion, passed, detail=""):
        """``passed`` is a bool, or ``None`` for a criterion that could not run."""
        status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
        _ACCEPTANCE_LINES.append(f"[{status}] criterion {criterion}: {detail}")
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def counties():
    return synthetic_counties()


@pytest.fixture(scope="session")
def county_draws(counties):
    ds, graph, _ = counties
    return run_chain(ds, graph, PriorSpec(), SamplerConfig(6000, 2000, seed=11))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
