import pytest

from randcover import build_lebesgue, build_middle_cantor, build_spaced_cantor


@pytest.fixture(scope="session")
def middle_third():
    return build_middle_cantor(1 / 3, 1.0)


@pytest.fixture(scope="session")
def unit_lebesgue():
    return build_lebesgue(0.0, 1.0)


@pytest.fixture(scope="session")
def spaced():
    return build_spaced_cantor(0.4, 0.8, 0.7)


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
