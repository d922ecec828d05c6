import pytest

from htsim.plant import ParameterSet

_ACCEPTANCE = []


def record_acceptance(number, name, ok, detail=""):
    _ACCEPTANCE.append((number, name, bool(ok), detail))
    return ok


@pytest.fixture
def table1():
    return ParameterSet()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        line = f"{'PASS' if ok else 'FAIL'}  [{number:2d}] {name}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)
