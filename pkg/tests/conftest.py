import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from pwcert.fixtures import FIXTURES  # noqa: E402


@pytest.fixture(params=sorted(FIXTURES))
def any_fixture(request):
    return request.param, FIXTURES[request.param]()


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_log():
    def record(number: int, title: str, ok: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append(f"[criterion {number}] {'PASS' if ok else 'FAIL'}  {title}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip("]"))):
            terminalreporter.write_line(line)
