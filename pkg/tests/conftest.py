import time

import numpy as np
import pytest

from oggn.oracle import synth_dataset, train_oracle
from oggn.poly import POLY4

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def poly4_data():
    train = synth_dataset(POLY4, 10000, 0.0, 500.0, seed=1, function_id="poly4")
    test = synth_dataset(POLY4, 1000, 0.0, 500.0, seed=2, function_id="poly4")
    return train, test


@pytest.fixture(scope="session")
def poly4_oracle_timed(poly4_data):
    train, test = poly4_data
    start = time.perf_counter()
    oracle = train_oracle(train, seed=0, validation=test)
    return oracle, time.perf_counter() - start


@pytest.fixture(scope="session")
def poly4_oracle(poly4_oracle_timed):
    return poly4_oracle_timed[0]


@pytest.fixture(scope="session")
def small_oracle():
    """A quick, rough oracle for tests that only need the plumbing."""
    data = synth_dataset(POLY4, 500, 0.0, 500.0, seed=5)
    return train_oracle(data, hidden=(16,), epochs=20, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def report():
    def _report(criterion, passed, detail):
        _ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}")
    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
