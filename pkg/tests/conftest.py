from pathlib import Path

import numpy as np
import pytest

from qst_disentangle.quantum import from_amplitudes

DATA = Path(__file__).parent / "data"


def ghz(n):
    amps = np.zeros(1 << n)
    amps[0] = amps[-1] = 1
    return from_amplitudes(amps, normalize=True)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def bell():
    return from_amplitudes([1, 0, 0, 1], normalize=True)


@pytest.fixture
def ghz3():
    return ghz(3)


@pytest.fixture
def data_dir():
    return DATA


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'} ({detail})")
