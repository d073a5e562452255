import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Show the acceptance verdict lines even when capture hides test output."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", None) if mod else None
    if lines:
        terminalreporter.section("acceptance verdicts")
        for line in lines:
            terminalreporter.write_line(line)
