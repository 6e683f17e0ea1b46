import pytest

# criterion id -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict[str, tuple[bool, str]] = {}
CRITERIA = [f"A{i}" for i in range(1, 10)]


@pytest.fixture
def accept():
    def record(cid: str, ok: bool, detail: str) -> None:
        ACCEPTANCE[cid] = (bool(ok), detail)
        print(f"{cid}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, f"{cid}: {detail}"
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in CRITERIA:
        if cid in ACCEPTANCE:
            ok, detail = ACCEPTANCE[cid]
            terminalreporter.write_line(f"{cid}: {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            terminalreporter.write_line(f"{cid}: NOT RUN")
