import pytest

from chainsel import value


@pytest.fixture(scope="session")
def grid300():
    return value.solve_value(300.0, 1e-3)


@pytest.fixture(scope="session")
def coarse_grid():
    # cheap grid for tests that only need the shape of u and theta*
    return value.solve_value(60.0, 1e-2)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
