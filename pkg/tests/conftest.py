"""Shared fixtures and the acceptance-criterion report hook."""

import numpy as np
import pytest

import ssvb

_ACCEPTANCE_RESULTS = []


def record_criterion(number: int, name: str, passed: bool, detail: str = ""):
    """Register one acceptance criterion outcome for the summary."""
    _ACCEPTANCE_RESULTS.append((number, name, passed, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number, name, passed, detail in sorted(_ACCEPTANCE_RESULTS):
        status = "PASS" if passed else "FAIL"
        line = f"criterion {number} [{status}] {name}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def example1_data():
    raw, beta, sigma_mat = ssvb.gen_example1(60, 1.0, 7)
    return ssvb.standardize(raw), beta, sigma_mat
