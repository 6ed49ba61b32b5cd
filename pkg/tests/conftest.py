import re

_CRITERION = re.compile(r"test_acceptance\.py::test_c(\d+)_(\w+)")


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, in criterion order."""
    verdicts = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            m = _CRITERION.search(getattr(rep, "nodeid", ""))
            if not m:
                continue
            key = (int(m.group(1)), m.group(2).replace("_", " "))
            ok = status == "passed" and verdicts.get(key, True)
            verdicts[key] = ok
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for (num, name), ok in sorted(verdicts.items()):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {num:2d}  {name}")
