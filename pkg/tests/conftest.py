import pytest

_ACCEPTANCE: dict[int, str] = {}


class AcceptanceLog:
    """Collects one verdict line per acceptance criterion."""

    def record(self, number: int, passed: bool | None, detail: str) -> bool:
        verdict = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
        line = f"ACCEPTANCE {number}: {verdict}  {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        return bool(passed)


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[number])
