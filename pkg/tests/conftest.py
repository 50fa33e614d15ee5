import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import _report


def pytest_terminal_summary(terminalreporter):
    if _report.LINES:
        terminalreporter.section("acceptance")
        for line in sorted(_report.LINES):
            terminalreporter.write_line(line)
