import pytest

from clnash.equilibrium import closed_loop_policy
from clnash.model import ModelParams, ScalingMode, apply_scaling


def table1(n=2, scaling=ScalingMode.RAW, **overrides):
    return apply_scaling(ModelParams.table1(n, **overrides), scaling)


@pytest.fixture
def params2():
    return ModelParams.table1(2)


@pytest.fixture
def params10():
    return ModelParams.table1(10)


@pytest.fixture(scope="session")
def solved2():
    return closed_loop_policy(ModelParams.table1(2))


@pytest.fixture(scope="session")
def synthetic():
    return ModelParams(beta=0.1, sigma=0.01, sigma_p=0.0, rho=0.05,
                       gamma_=1e-4, lambda_=1e-6, n_agents=3)


# lines recorded by the acceptance tests, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
