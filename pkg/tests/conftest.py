import pytest

_ACCEPTANCE: list[tuple[str, bool, str]] = []


class Criterion:
    """Records one acceptance verdict, then asserts it."""

    def __call__(self, name: str, ok: bool, detail: str = "") -> None:
        _ACCEPTANCE.append((name, bool(ok), detail))
        print(f"{name}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, f"{name}: {detail}"


@pytest.fixture
def criterion():
    return Criterion()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
