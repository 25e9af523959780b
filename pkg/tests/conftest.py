import pytest

# criterion number -> (ok, summary); filled by tests/test_acceptance.py
ACCEPTANCE = {}
CRITERIA = {
    1: "Euler-Lagrange identity",
    2: "zero deficit on the manifold",
    3: "spectral values",
    4: "sharpness slopes",
    5: "stability floor",
    6: "inequality suite",
    7: "determinism",
}


@pytest.fixture
def criterion():
    """record(number, ok, summary) stores one verdict and prints it."""

    def record(number, ok, summary):
        ACCEPTANCE[number] = (bool(ok), summary)
        print(f"[{'PASS' if ok else 'FAIL'}] criterion {number} ({CRITERIA[number]}): {summary}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title in CRITERIA.items():
        if number in ACCEPTANCE:
            ok, summary = ACCEPTANCE[number]
            terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number} ({title}): {summary}")
        else:
            terminalreporter.write_line(f"[FAIL] criterion {number} ({title}): not run or crashed")
