import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=2000, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def coffee():
    from causalprm.harness import case_config, load_experiment
    return load_experiment(case_config("coffee_soda"))


@pytest.fixture(scope="session")
def cases():
    from causalprm.harness import CASE_STUDIES, case_config, load_experiment
    return {name: load_experiment(case_config(name)) for name in CASE_STUDIES}


def pytest_terminal_summary(terminalreporter):
    from scoreboard import LINES
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
