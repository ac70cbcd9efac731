"""Per-criterion pass/fail summary for the acceptance suite.

Tests tagged ``@pytest.mark.criterion(n, "title")`` are grouped by n; a
criterion passes when every test carrying its number passed. Tests may add
measured values to the summary through the ``criterion_note`` fixture.
"""
from collections import defaultdict

import pytest

_titles = {}
_outcomes = defaultdict(list)
_notes = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number")


def _criterion(item):
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return None
    n = mark.args[0]
    if len(mark.args) > 1:
        _titles[n] = mark.args[1]
    return n


def pytest_collection_modifyitems(items):
    for item in items:
        _criterion(item)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    n = _criterion(item)
    if n is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _outcomes[n].append(rep.outcome)


@pytest.fixture
def criterion_note(request):
    n = _criterion(request.node)

    def note(text):
        _notes[n].append(text)
    return note


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_outcomes):
        res = _outcomes[n]
        status = "PASS" if res and all(r == "passed" for r in res) else "FAIL"
        counts = f"{res.count('passed')}/{len(res)} tests"
        tr.write_line(f"criterion {n} [{status}] {_titles.get(n, '')} ({counts})")
        for text in _notes[n]:
            tr.write_line(f"    {text}")
