import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from syzygy.integrator import integrate
from syzygy.orbits import TIGHT, euler_circular, figure_eight, lagrange_circular
from syzygy.state import BodyState, Masses

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_states(rng, n, masses=None, box=1.0, min_sep=0.05):
    """Random barycentric (masses, state) pairs with separated bodies."""
    out = []
    while len(out) < n:
        m = masses or Masses(*rng.uniform(0.2, 5.0, size=3))
        r = rng.uniform(-box, box, size=(3, 2))
        d = [np.hypot(*(r[i] - r[j])) for i, j in ((0, 1), (1, 2), (0, 2))]
        if min(d) < min_sep:
            continue
        v = rng.normal(0.0, 1.0, size=(3, 2))
        out.append((m, BodyState.barycentric(m, r, v)))
    return out


@pytest.fixture(scope="session")
def f8():
    return figure_eight()


@pytest.fixture(scope="session")
def f8_traj(f8):
    return integrate(f8.masses, f8.state, f8.period, TIGHT)


@pytest.fixture(scope="session")
def lagrange():
    return lagrange_circular()


@pytest.fixture(scope="session")
def lagrange_traj(lagrange):
    return integrate(lagrange.masses, lagrange.state, lagrange.period, TIGHT)


@pytest.fixture(scope="session")
def euler1():
    """Equal-mass Euler orbit with body 1 in the middle, so rho1 < rho2 = rho3."""
    return euler_circular(central=1)


@pytest.fixture(scope="session")
def euler1_traj(euler1):
    return integrate(euler1.masses, euler1.state, euler1.period, TIGHT)


# acceptance results, filled by tests/test_acceptance.py and printed once at the end
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
