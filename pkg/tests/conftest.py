from functools import lru_cache

import pytest

from trisym.sections import solve_adhm1d

# Filled by test_acceptance; printed once at the end of the run.
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@lru_cache(maxsize=None)
def solved(r: int, c: int, seed: int = 0):
    return solve_adhm1d(r, c, seed)


@pytest.fixture(scope="session")
def section21():
    return solved(2, 1, 0)


@pytest.fixture(scope="session")
def section22():
    return solved(2, 2, 1)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
