import pytest

_REPORT_KEY = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def acceptance_report(request):
    """Collects one summary line per acceptance criterion."""
    return request.config.stash.setdefault(_REPORT_KEY, {})


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    report = config.stash.get(_REPORT_KEY, None)
    if not report:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(report, key=lambda k: int(k[1:])):
        terminalreporter.write_line(report[key])
