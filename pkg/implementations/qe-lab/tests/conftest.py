# tests/conftest.py

import os
import sys

# Adjust the import path if necessary
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

# Small grids keep the suites fast; set before the settings singleton is created
os.environ["QELAB_GRID_POINTS"] = "3"
os.environ["QELAB_LOG_LEVEL"] = "WARNING"

# These imports need to be after setting the environment so the settings pick it up
import pytest
from qelab.services import zoo
from qelab.services.geometry import convention_self_test
from qelab.services.profiles import integrate_profile, profile_ode
from qelab.utils.logging import setup_logging

# Setup logging for tests
setup_logging("WARNING")


@pytest.fixture(scope="session", autouse=True)
def curvature_convention():
    """Fail fast when the curvature sign convention is broken."""
    assert convention_self_test(), "curvature convention self-test failed"


@pytest.fixture(scope="session")
def euclid3():
    return zoo.build("euclid3")


@pytest.fixture(scope="session")
def line_exp():
    return zoo.build("table1-line-exp", m=2)


@pytest.fixture(scope="session")
def product_exp():
    return zoo.build("table1-product-exp", m=2)


@pytest.fixture(scope="session")
def case2_a():
    return zoo.build("case2-a", m=2)


@pytest.fixture(scope="session")
def case2_b():
    return zoo.build("case2-b", m=2)


@pytest.fixture(scope="session")
def thm1_ii():
    return zoo.build("thm1-ii", m=2)


@pytest.fixture(scope="session")
def thm1_iii():
    """Non-Einstein rotationally symmetric model."""
    return zoo.build("thm1-iii", m=2, a=1.5)


@pytest.fixture(scope="session")
def hyperbolic_iii():
    """The ``a = 1`` member, which is hyperbolic space."""
    return zoo.build("thm1-iii", m=2, a=1.0)


@pytest.fixture(scope="session")
def cosh_profile():
    return integrate_profile(profile_ode("thm1-iii", m=2, a=1.0))


@pytest.fixture(scope="session")
def thm1_ii_profile():
    return integrate_profile(profile_ode("thm1-ii", m=2))
