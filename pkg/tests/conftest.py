import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for index in sorted(mod.RESULTS):
        ok, line = mod.RESULTS[index]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {line}")
