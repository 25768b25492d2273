"""Shared reporting for the acceptance suite.

Each acceptance test records exactly one [criterion NN] PASS/FAIL line;
the terminal summary prints them after the run so the verdicts are
visible without -s.
"""

CRITERIA: dict[int, tuple[bool, str]] = {}


def record_criterion(num: int, ok: bool, detail: str) -> None:
    CRITERIA[num] = (bool(ok), detail)
    status = "PASS" if ok else "FAIL"
    line = f"[criterion {num:02d}] {status} — {detail}"
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(CRITERIA):
        ok, detail = CRITERIA[num]
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[criterion {num:02d}] {status} — {detail}")
