import math

import numpy as np
import pytest

from nhtrap.dynamics import HamiltonianSystem
from nhtrap.warped import CrossSection, WarpedModel, dynamics_for_model

@pytest.fixture(scope="session")
def cylinder():
    return dynamics_for_model(WarpedModel(CrossSection("circle"), 2, 0.1))

@pytest.fixture(scope="session")
def torus():
    return dynamics_for_model(WarpedModel(CrossSection("revolution", beta=0.3), 3, 0.1))

def k_point(theta=0.0, E=1.0, C=1.0):
    return np.array([0.0, theta, 0.0, C * E])

@pytest.fixture(scope="session")
def saddle():
    """``p = xi^2/2 - x^2/2 + 1`` plus a free direction: a linear hyperbolic model."""

    def p(z):
        return 0.5 * z[2] ** 2 - 0.5 * z[0] ** 2 + 0.5 * z[3] ** 2 + 1.0

    def grad(z):
        return np.array([-z[0], 0.0, z[2], z[3]])

    def hess(z):
        return np.diag([-1.0, 0.0, 1.0, 1.0])

    return HamiltonianSystem(2, p, grad, hess, 3.0, 5.0, exit_coordinate=lambda z: float(z[0]),
                             name="saddle")

@pytest.fixture(scope="session")
def linear_hyperbolic():
    """``p = x xi + 1`` on ``T*R``: exp(tH) (x, xi) = (e^t x, e^-t xi)."""

    def p(z):
        return z[0] * z[1] + 1.0

    def grad(z):
        return np.array([z[1], z[0]])

    def hess(z):
        return np.array([[0.0, 1.0], [1.0, 0.0]])

    return HamiltonianSystem(1, p, grad, hess, 3.0, 5.0, name="linear")

SQRT_TANH1 = math.tanh(1.0)


# ---- acceptance report ----------------------------------------------------------

ACCEPTANCE = {}


@pytest.fixture(scope="session")
def acceptance():
    return ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
