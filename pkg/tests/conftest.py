import pytest

from daumc.automaton import Discounted, Min, make_automaton
from daumc.casestudy import fixture_path
from daumc.oracle import load_model

ACCEPTANCE_LINES: dict[int, str] = {}


def toy_automaton(acc=None):
    return make_automaton(
        {"a": {"p"}, "b": {"q"}}, "a",
        [("a", "K1", "a", 1.0), ("a", "K2", "b", 0.0), ("b", "K3", "b", 5.0)],
        acc or Discounted(0.5),
    )


@pytest.fixture
def toy():
    return toy_automaton()


@pytest.fixture
def toy_min():
    return toy_automaton(Min())


@pytest.fixture(scope="session")
def fig2():
    return load_model(fixture_path("fig2.json"))


@pytest.fixture(scope="session")
def acceptance_report():
    """Criterion number -> one-line PASS/FAIL summary, printed at the end of the run."""
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
