import pytest

from polarprune.codeword import CodeSpec, rm_profile

_CRITERIA: list[tuple[int, bool, str]] = []


def record_criterion(number: int, ok: bool, detail: str) -> None:
    _CRITERIA.append((number, bool(ok), detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted({c[0] for c in _CRITERIA}):
        parts = [c for c in _CRITERIA if c[0] == number]
        ok = all(c[1] for c in parts)
        detail = "; ".join(c[2] for c in parts)
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def example_spec():
    return CodeSpec.pac(8, 4, (4, 6, 7, 8), "321")


@pytest.fixture(scope="session")
def pac128():
    return CodeSpec.pac(128, 64, rm_profile(128, 64))
