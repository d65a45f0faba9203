import time

import pytest

_CRITERIA: list[tuple[int, str, bool, str, float]] = []


class _Recorder:
    def __init__(self):
        self.t0 = time.perf_counter()

    def __call__(self, number: int, name: str, ok: bool, detail: str = "") -> bool:
        elapsed = time.perf_counter() - self.t0
        _CRITERIA.append((number, name, bool(ok), detail, elapsed))
        print(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {name}  [{elapsed:.1f} s]  {detail}")
        return bool(ok)


@pytest.fixture
def criterion():
    """Record one acceptance line; the test still asserts on its own."""
    return _Recorder()


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok, detail, elapsed in sorted(_CRITERIA, key=lambda c: c[0]):
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {name}  [{elapsed:.1f} s]  {detail}")
