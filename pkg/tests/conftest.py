import dataclasses

import pytest

from nomahet import config, simulator


@pytest.fixture(scope="session")
def net():
    return config.defaults()[0]


@pytest.fixture(scope="session")
def noma():
    return config.defaults()[1]


@pytest.fixture(scope="session")
def small_stats(net):
    return simulator.sample_link_stats(net, 4000, seed=11)


def with_noma(noma, **kw):
    return dataclasses.replace(noma, **kw)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
