import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from drivetwin.telemetry import Profile

settings.register_profile("default", deadline=None, max_examples=50, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_profile(n=10, dt=1.0, seed=0, target=True, id="p"):
    rng = np.random.default_rng(seed)
    t = np.arange(n) * dt
    return Profile(
        id=id,
        t=t,
        f_d=rng.uniform(0, 50, n),
        I_d=rng.uniform(0, 38, n),
        P_d=rng.uniform(0, 15000, n),
        T_amb=25 + rng.normal(0, 1, n),
        T_C=(40 + rng.normal(0, 5, n)) if target else None,
        nominal_dt=dt,
    )


@pytest.fixture
def profile():
    return make_profile(50)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
