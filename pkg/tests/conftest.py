"""Collect one pass/fail line per acceptance criterion and print them after the run."""
import pytest

_RESULTS: dict[int, tuple[str, str, str]] = {}



@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    number, title = mark.args[:2]
    gating = mark.kwargs.get("gating", True)
    detail = dict(item.user_properties).get("detail", "")
    if not gating:
        status = dict(item.user_properties).get("status", "INFO")
        status = f"{status} (informational)"
    else:
        status = "PASS" if rep.passed else "FAIL"
    _RESULTS[number] = (status, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        status, title, detail = _RESULTS[number]
        line = f"criterion {number:>2}: {status:<5} {title}"
        terminalreporter.write_line(line + (f" | {detail}" if detail else ""))
