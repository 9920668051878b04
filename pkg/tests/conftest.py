import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_report():
    """Collects one summary line per acceptance criterion."""

    def report(number, title: str, checks: list[tuple[str, bool, str]], elapsed: float):
        ok = all(c[1] for c in checks)
        parts = "; ".join(f"{name}: {detail} [{'ok' if good else 'FAIL'}]" for name, good, detail in checks)
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title} ({elapsed:.1f} s) | {parts}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
