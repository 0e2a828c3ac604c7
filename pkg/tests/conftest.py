import functools

import pytest

from divrange import joint_range, parse_spec


@functools.lru_cache(maxsize=None)
def region_for(f_spec: str, g_spec: str, n: int = 512):
    return joint_range(parse_spec(f_spec), parse_spec(g_spec), n=n)


@pytest.fixture(scope="session")
def region():
    return region_for


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def criterion():
    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
