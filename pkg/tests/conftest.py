import numpy as np
import pytest

from arqlab import linalg


@pytest.fixture
def f64():
    with linalg.precision(64):
        yield


@pytest.fixture
def f32():
    with linalg.precision(32):
        yield


@pytest.fixture
def rng():
    return linalg.SeededRng(1234)


def pytest_report_header(config):
    return f"numpy {np.__version__}"


@pytest.fixture(autouse=True)
def _restore_precision():
    # training and checkpoint loading set the global precision
    bits = linalg.get_precision()
    yield
    linalg.set_precision(bits)


# (criterion, status, detail) lines recorded by test_acceptance.py
ACCEPTANCE: dict[int, tuple[str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status} {detail}")
