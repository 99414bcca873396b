import re

import pytest

ACCEPTANCE = "test_acceptance.py"
CRITERION = re.compile(r"::test_criterion_(\d+)")


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion; parametrized cases must all pass."""
    status: dict[int, bool] = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            m = CRITERION.search(getattr(rep, "nodeid", ""))
            if not m or ACCEPTANCE not in rep.nodeid:
                continue
            if outcome == "passed" and rep.when != "call":
                continue
            n = int(m.group(1))
            status[n] = status.get(n, True) and outcome == "passed"
    if not status:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(status):
        terminalreporter.write_line(f"{'PASS' if status[n] else 'FAIL'}  criterion {n}")


@pytest.fixture
def run_cli(capsys):
    from ffmarkov.cli import main

    def run(*argv):
        code = main([str(a) for a in argv])
        out, err = capsys.readouterr()
        return code, out, err

    return run
