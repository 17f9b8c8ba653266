from __future__ import annotations

import re

import pytest

CRITERIA = {
    1: "smooth 1-D full-scale reproduction",
    2: "piecewise 1-D full-scale reproduction",
    3: "smooth 2-D at reduced scale",
    4: "piecewise 2-D at reduced scale",
    5: "smooth 3-D at reduced scale",
    6: "oracle equivalence",
    7: "property suites",
}

# criterion -> [(part, ok, detail)]
RESULTS: dict[int, list[tuple[str, bool, str]]] = {}
SELECTED: set[int] = set()
_CRITERION = re.compile(r"test_acceptance\.py::TestCriterion(\d+)::(\w+)")


@pytest.fixture
def accept():
    def record(criterion: int, part: str, ok: bool, detail: str = "") -> bool:
        RESULTS.setdefault(criterion, []).append((part, bool(ok), detail))
        return bool(ok)
    return record


def pytest_collection_finish(session):
    for item in session.items:
        m = _CRITERION.search(item.nodeid)
        if m:
            SELECTED.add(int(m.group(1)))


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if m and report.failed:
        RESULTS.setdefault(int(m.group(1)), []).append((m.group(2), False, f"test {report.when} failed"))


def pytest_terminal_summary(terminalreporter):
    if not SELECTED:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n, title in CRITERIA.items():
        if n not in SELECTED:
            continue
        parts = RESULTS.get(n, [])
        ok = bool(parts) and all(p[1] for p in parts)
        status = "PASS" if ok else "FAIL"
        tr.write_line(f"[{status}] criterion {n}: {title}")
        if not parts:
            tr.write_line("    no result recorded")
        for part, good, detail in parts:
            tr.write_line(f"    {'ok  ' if good else 'FAIL'} {part}" + (f": {detail}" if detail else ""))
