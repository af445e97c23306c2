import textwrap

import pytest
import yaml
from hypothesis import HealthCheck, settings

from cdpmap.simulator import SimulatedNetwork, fixture_from_dict, load_fixture, shipped_fixture

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def fixture_from_yaml(text):
    return fixture_from_dict(yaml.safe_load(textwrap.dedent(text)))


@pytest.fixture(scope="session")
def figure1_fixture():
    return load_fixture(shipped_fixture("figure1"))


@pytest.fixture
def figure1_net(figure1_fixture):
    return SimulatedNetwork(figure1_fixture)


TRIANGLE = """
devices:
  - deviceId: A
    managementIp: 10.0.0.1
    interfaces: [{name: e1, ifIndex: 1}, {name: e2, ifIndex: 2}]
  - deviceId: B
    managementIp: 10.0.0.2
    interfaces: [{name: e1, ifIndex: 1}, {name: e2, ifIndex: 2}]
  - deviceId: C
    managementIp: 10.0.0.3
    interfaces: [{name: e1, ifIndex: 1}, {name: e2, ifIndex: 2}]
links:
  - {a: [A, e1], b: [B, e1]}
  - {a: [A, e2], b: [C, e1]}
  - {a: [B, e2], b: [C, e2]}
"""


@pytest.fixture
def triangle():
    return fixture_from_yaml(TRIANGLE)


_results = []


def record_criterion(line):
    _results.append(line)


def pytest_terminal_summary(terminalreporter):
    if _results:
        terminalreporter.section("acceptance criteria")
        for line in _results:
            terminalreporter.write_line(line)
