import pytest

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not rep.failed:
        return
    n, title = mark.args
    detail = "; ".join(f"{v}" for k, v in item.user_properties if k == "detail")
    status = "PASS" if rep.passed else "FAIL"
    if n not in _criteria or status == "FAIL":
        _criteria[n] = (status, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        status, title, detail = _criteria[n]
        line = f"[{status}] criterion {n}: {title}"
        terminalreporter.write_line(line + (f" -- {detail}" if detail else ""))
