import numpy as np
import pytest

from motif import oracle, rfnet
from motif.geometry import ParamSpace, XfmrGeometry, XfmrTemplate

ALL_TEMPLATES = list(XfmrTemplate)


@pytest.fixture
def half_grid():
    return rfnet.FrequencyGrid.half_ghz()


@pytest.fixture
def one_grid():
    return rfnet.FrequencyGrid.one_ghz()


@pytest.fixture
def mn_geometry():
    return XfmrGeometry(XfmrTemplate.M_TO_N, 2, 3, 150.0, 6.0, 3.0, 2.0)


@pytest.fixture(scope="session")
def small_mn_dataset():
    """300 M:N samples on the 100 GHz grid, shared by the quick tests."""
    space = ParamSpace.default(XfmrTemplate.M_TO_N)
    return oracle.generate_dataset(space, XfmrTemplate.M_TO_N, 300, rfnet.FrequencyGrid.half_ghz(), seed=5)


def random_passive_s(rng, n=4, margin=0.95):
    """Random reciprocal matrix with spectral norm below ``margin``."""
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    a = a + a.T
    return margin * a / np.linalg.norm(a, 2)


ACCEPTANCE: dict[int, str] = {}


@pytest.fixture(scope="session")
def acceptance_log():
    """Criterion number -> one-line verdict, echoed in the terminal summary."""
    return ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
