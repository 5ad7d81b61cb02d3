import sys

import numpy as np
import pytest

from bimorph_ao import hinf
from bimorph_ao.plant import build_default_plant
from bimorph_ao.plate_modes import PhysicalParams


@pytest.fixture(scope="session")
def params():
    return PhysicalParams()


@pytest.fixture(scope="session")
def default_system(params):
    """(plant, basis, turbulence model) for the default configuration."""
    return build_default_plant(params, n_basis=18)


@pytest.fixture(scope="session")
def plant(default_system):
    return default_system[0]


@pytest.fixture(scope="session")
def synthesis(plant):
    return hinf.gamma_bisect(plant, 1e-3, 10.0, tol=1e-3)


@pytest.fixture(scope="session")
def controller(synthesis):
    return synthesis["controller"]


def random_spd(rng, n, cond=10.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return (Q * np.geomspace(1.0, cond, n)) @ Q.T


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
