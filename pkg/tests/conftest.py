"""Shared pytest wiring: the acceptance checks register one result line
each and the terminal summary echoes them after the run, pass or fail."""

ACCEPTANCE_RESULTS: list[str] = []


def record_acceptance(num: int, label: str, ok: bool, detail: str = "") -> None:
    verdict = "PASS" if ok else "FAIL"
    line = f"criterion {num:2d} [{verdict}] {label}"
    if detail:
        line += f" -- {detail}"
    ACCEPTANCE_RESULTS.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(line)
