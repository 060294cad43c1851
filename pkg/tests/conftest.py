import pytest

_LINES = pytest.StashKey[dict]()


@pytest.fixture
def verdict(request):
    """report(ok, detail) for the criterion named by the test's ``criterion`` marker.

    Every acceptance test leaves exactly one PASS/FAIL line, collected into a
    terminal-summary section; a test that raises before reporting is a FAIL.
    """
    n = request.node.get_closest_marker("criterion").args[0]
    lines = request.config.stash.setdefault(_LINES, {})

    def report(ok: bool, detail: str):
        lines[n] = f"{'PASS' if ok else 'FAIL'}  criterion {n:>2}  {detail}"
        print(lines[n])
        assert ok, lines[n]

    yield report
    lines.setdefault(n, f"FAIL  criterion {n:>2}  raised before a verdict")


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
