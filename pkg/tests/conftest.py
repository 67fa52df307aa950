import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from oldroyd import spectral as sp

settings.register_profile(
    "default", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# filled by tests/test_acceptance.py: id -> (passed, detail)
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for ac in sorted(ACCEPTANCE, key=lambda k: int(k[2:])):
        ok, detail = ACCEPTANCE[ac]
        terminalreporter.write_line(f"{ac}: {'PASS' if ok else 'FAIL'}  {detail}")


def random_real(grid, lead=(), seed=0, band=None):
    """Real, mean-zero, dealiased random field; optional ``|k|`` band."""
    rng = np.random.default_rng(seed)
    f = sp.to_spectral(grid, rng.standard_normal(tuple(lead) + grid.shape))
    if band is not None:
        f = f * ((grid.kabs >= band[0]) & (grid.kabs <= band[1]))
    return sp.zero_mean(grid, f)


def random_solenoidal(grid, seed=0, band=(1, 6)):
    return sp.leray_project(grid, random_real(grid, (grid.dim,), seed, band))


@pytest.fixture
def grid2():
    return sp.get_grid(2, 32)


@pytest.fixture
def grid3():
    return sp.get_grid(3, 16)
