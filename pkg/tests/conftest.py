"""Shared test plumbing: collects acceptance-criterion verdicts and prints
one line per criterion at the end of the run."""

ACCEPTANCE_RESULTS = {}


def record_criterion(number: int, status: str, detail: str = "") -> None:
    """status is 'PASS', 'FAIL' or 'SKIPPED'."""
    ACCEPTANCE_RESULTS[number] = (status, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        status, detail = ACCEPTANCE_RESULTS[number]
        line = f"criterion {number}: {status}"
        if detail:
            line += f" - {detail}"
        terminalreporter.write_line(line)
