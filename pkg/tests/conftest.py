import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_criteria: dict[int, dict] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            n, title = m.args
            _criteria.setdefault(n, {"title": title, "ok": True, "seen": 0, "ids": set()})["ids"].add(item.nodeid)


def pytest_runtest_logreport(report):
    for c in _criteria.values():
        if report.nodeid in c["ids"]:
            if report.when == "call":
                c["seen"] += 1
            if report.failed or (report.when == "call" and report.skipped):
                c["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        c = _criteria[n]
        ok = c["ok"] and c["seen"] == len(c["ids"])
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {n}: {c['title']}")
