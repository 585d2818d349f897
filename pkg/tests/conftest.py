import mpmath
import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


def mp_fgn_rho(H, k, dps=60):
    """Second difference of |k|^{2H} at working precision ``dps``."""
    with mpmath.workdps(dps):
        H = mpmath.mpf(H)
        k = mpmath.mpf(k)
        return (abs(k + 1) ** (2 * H) - 2 * abs(k) ** (2 * H) + abs(k - 1) ** (2 * H)) / 2


@pytest.fixture
def rng():
    return np.random.default_rng(20240531)


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion, then assert."""

    def record(number: int, ok: bool, detail: str):
        ACCEPTANCE_LINES.append(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
