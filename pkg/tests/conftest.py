import numpy as np
import pytest

from stochcoll.sde import AgentDynamics, Plan


def static_agent(pos, var=1e-5, gain=1.0, diameter=1.0, tf=1.0):
    """Agent parked at ``pos`` with stationary variance ``var`` per axis."""
    pos = np.asarray(pos, dtype=float)
    dyn = AgentDynamics(gains=gain, noise=2.0 * gain * var, initial_mean=pos, initial_cov=var, diameter=diameter)
    return dyn, Plan([0.0], [pos], tf)


@pytest.fixture
def fig1_func():
    return lambda x: abs(np.sin(x)) * np.cos(x) + 0.25


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[n])
