import sys
from pathlib import Path

# Test modules share helpers (scenarios.py and the oracles in other modules).
sys.path.insert(0, str(Path(__file__).parent))

_VERDICTS = []


def record(name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    _VERDICTS.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
