import sys


def pytest_terminal_summary(terminalreporter):
    # one pass/fail line per acceptance criterion, if those tests ran
    mod = next((m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    lines = getattr(mod, "CRITERIA", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(lines):
        terminalreporter.write_line(lines[k])
