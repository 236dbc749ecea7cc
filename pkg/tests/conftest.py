import numpy as np
import pytest

from skuniv.disorder import CATALOG, EnvironmentSpec

# mean 0, variance 0.8 + 0.2 = 1, E xi^3 != 0
SKEWED_TWO_POINT = EnvironmentSpec("discrete_custom", ((2.0, 0.2), (-0.5, 0.8)))
# symmetric three-point law with variance 1
THREE_POINT = EnvironmentSpec("discrete_custom", ((-np.sqrt(2.0), 0.25), (0.0, 0.5), (np.sqrt(2.0), 0.25)))

ALL_ENVS = [EnvironmentSpec(name) for name in CATALOG] + [SKEWED_TWO_POINT, THREE_POINT]


def pytest_addoption(parser):
    parser.addoption("--quick", action="store_true", help="skip tests marked slow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--quick"):
        skip = pytest.mark.skip(reason="--quick")
        for item in items:
            if "slow" in item.keywords:
                item.add_marker(skip)


@pytest.fixture(params=ALL_ENVS, ids=lambda e: e.env_id[:24])
def any_env(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
