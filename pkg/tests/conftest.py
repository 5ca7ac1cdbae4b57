import sys
from pathlib import Path

import pytest

# Lets test modules import the shared oracles by name.
sys.path.insert(0, str(Path(__file__).resolve().parent))

_RESULTS = pytest.StashKey[dict]()


@pytest.fixture
def record(request):
    """``record(number, title, ok, detail)`` stores one acceptance outcome and prints it."""
    results = request.config.stash.setdefault(_RESULTS, {})

    def _record(number, title, ok, detail):
        results[number] = (bool(ok), title, detail)
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        reporter = request.config.pluginmanager.get_plugin("terminalreporter")
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    results = terminalreporter.config.stash.get(_RESULTS, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        ok, title, detail = results[number]
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
