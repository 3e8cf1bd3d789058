import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hindsight.game import GameDesign, OutcomeData, ThetaParams, simulate_game

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# Lines appended by the acceptance tests; echoed in the terminal summary.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def theta0():
    return ThetaParams(beta=1.0, phi=0.0)


@pytest.fixture(scope="session")
def small_game():
    """Three groups of 20 players simulated at beta=1, phi=0.5."""
    theta = ThetaParams(beta=1.0, phi=0.5)
    return simulate_game(theta, GameDesign.uniform(3, 20, seed=11))


def make_data(actions, covariates, group_of, num_actions=2):
    group_of = np.asarray(group_of)
    return OutcomeData(
        actions=np.asarray(actions), covariates=np.asarray(covariates, dtype=float),
        signals=np.zeros(int(group_of.max()) + 1), group_of=group_of, num_actions=num_actions,
    )
