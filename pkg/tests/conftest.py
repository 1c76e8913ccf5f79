import sys
from pathlib import Path

# test helpers (strategies, oracles) live next to the tests
sys.path.insert(0, str(Path(__file__).parent))

import report  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if not report.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(report.RESULTS):
        terminalreporter.write_line(report.RESULTS[number])
