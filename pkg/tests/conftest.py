import pytest

_REPORT = []


@pytest.fixture(scope="session")
def criterion_report():
    """Collects one ``(number, passed, detail)`` line per acceptance criterion."""

    def record(number, title, passed, detail):
        _REPORT.append((number, title, passed, detail))
        print(f"criterion {number} {'PASS' if passed else 'FAIL'}: {title}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(_REPORT, key=lambda r: r[0]):
        terminalreporter.write_line(
            f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        )
