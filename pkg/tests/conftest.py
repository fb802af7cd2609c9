"""Collects one summary line per acceptance criterion."""
import numpy as np
import pytest

_LINES: dict = {}


def record(key, passed, text):
    """Store (and print) a criterion line; ``passed=None`` marks it informational."""
    tag = "INFO" if passed is None else ("PASS" if passed else "FAIL")
    line = f"[{tag}] criterion {key}: {text}"
    _LINES[str(key)] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")

    def order(k):
        head, _, tail = k.partition("-")
        return int(head), tail

    for k in sorted(_LINES, key=order):
        terminalreporter.write_line(_LINES[k])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
