import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ncsched.geometry import Polytope
from ncsched.models import AgentSpec, build_sc, vehicle_spec
from ncsched.invariance import invariant_set

settings.register_profile("ci", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")

EX8_TAUS = [0.1, 0.2, 0.3, 0.4, 0.5]
EX8_BOUNDS = [2.0, 1.0, 0.45, 0.25, 0.15]


def example2_spec():
    return AgentSpec([[1.0, 0.5], [-0.5, 1.0]], [[0.0], [1.0]], [[0.0], [1.0]],
                     Polytope.symmetric_box([2, 2]), Polytope.symmetric_box([5]),
                     Polytope.symmetric_box([0.45]), K=[[0.2263, 1.2988]])


@pytest.fixture(scope="session")
def example2():
    mp = build_sc(example2_spec())
    inv = invariant_set(mp)
    return mp, inv


@pytest.fixture(scope="session")
def example8_agents():
    from ncsched.simulator import prepare_agent
    return [prepare_agent(vehicle_spec(t, v)) for t, v in zip(EX8_TAUS, EX8_BOUNDS)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = {}


@pytest.fixture
def acceptance_log():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[n])
