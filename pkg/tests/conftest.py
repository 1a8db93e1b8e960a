import pytest

# (criterion, passed, seconds, detail) rows filled by test_acceptance.py
ACCEPTANCE_LINES: list[tuple[str, bool, float, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, secs, detail in sorted(ACCEPTANCE_LINES, key=lambda r: int(r[0].split("-")[1])):
        terminalreporter.write_line(f"{name:6s} {'PASS' if ok else 'FAIL'}  {secs:7.2f}s  {detail}")


@pytest.fixture
def criterion():
    """Record one acceptance line; use as ``with criterion("AC-1") as rec: ... rec(ok, detail)``."""
    import contextlib
    import time

    @contextlib.contextmanager
    def _ctx(name):
        state = {"ok": False, "detail": ""}

        def rec(ok, detail=""):
            state["ok"], state["detail"] = bool(ok), detail

        t0 = time.perf_counter()
        try:
            yield rec
        finally:
            secs = time.perf_counter() - t0
            ACCEPTANCE_LINES.append((name, state["ok"], secs, state["detail"]))
            print(f"{name} {'PASS' if state['ok'] else 'FAIL'} ({secs:.2f}s) {state['detail']}")

    return _ctx
