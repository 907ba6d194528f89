"""Collects the acceptance verdicts and repeats them after the run."""
import pytest

_LINES = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """``verdict(n, ok, detail)`` prints and records one line per criterion."""
    def record(n: int, ok: bool, detail: str) -> bool:
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        request.config.stash.setdefault(_LINES, []).append((n, line))
        return ok
    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
