import pytest

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num, title): acceptance criterion")
    config.addinivalue_line("markers", "slow: takes more than a few seconds")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    num, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[rep.outcome]
        detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
        if rep.outcome == "skipped" and isinstance(rep.longrepr, tuple):
            detail = rep.longrepr[2]
        _criteria[num] = (title, status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        title, status, detail = _criteria[num]
        line = f"criterion {num:>2} {status:4}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
