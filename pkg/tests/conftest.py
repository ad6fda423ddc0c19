"""Shared test plumbing: the acceptance-criteria summary block."""

_CRITERION_LINES: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    """Register one acceptance criterion outcome for the terminal summary."""
    _CRITERION_LINES[number] = (ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERION_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERION_LINES):
        ok, detail = _CRITERION_LINES[number]
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status} ({detail})")
