"""Collects acceptance verdicts and prints them after the run."""

ACCEPTANCE: dict = {}


def record(key: str, label: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE[key] = (label, bool(passed), detail)
    print(f"{'PASS' if passed else 'FAIL'}  {key} {label}: {detail}")


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance checks")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance summary")
    for key in sorted(ACCEPTANCE):
        label, passed, detail = ACCEPTANCE[key]
        tr.write_line(f"{'PASS' if passed else 'FAIL'}  {key} {label}: {detail}")
