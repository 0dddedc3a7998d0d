_LINES = []


def record(criterion: str, ok: bool, detail: str) -> bool:
    """Store one acceptance verdict line; returns ``ok`` for use in asserts."""
    _LINES.append(f"{'PASS' if ok else 'FAIL'} [{criterion}] {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
