ACCEPTANCE_FILE = "test_acceptance.py"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion, printed after the run."""
    verdicts: dict[str, str] = {}
    for key in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(key, []):
            nodeid = getattr(report, "nodeid", "")
            if ACCEPTANCE_FILE not in nodeid:
                continue
            verdict = "PASS" if key == "passed" else "FAIL"
            if verdicts.get(nodeid) != "FAIL":
                verdicts[nodeid] = verdict
    if not verdicts:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for nodeid in sorted(verdicts):
        name = nodeid.split("::")[-1]
        terminalreporter.write_line(f"ACCEPTANCE {verdicts[nodeid]} {name}")
