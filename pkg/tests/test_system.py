import numpy as np
import pytest

from conftest import random_real, random_solenoidal
from oldroyd import initial_data as idt
from oldroyd import spectral as sp
from oldroyd import system as sy


@pytest.fixture(scope="module")
def admissible2():
    g = sp.get_grid(2, 32)
    return idt.make_initial_state(g, idt.DataSpec(amplitude=0.03, seed=3))


def test_rest_state_is_stationary(grid2, grid3):
    for g in (grid2, grid3):
        dv, dE = sy.rhs_vE(g, sy.State.rest(g), 1.0)
        assert not np.any(dv) and not np.any(dE)


def test_state_replace_keeps_other_fields(grid2):
    s = sy.State.rest(grid2)
    s2 = s.replace(t=2.0)
    assert s2.t == 2.0 and s2.v is s.v and s2.E is s.E


def test_velocity_rhs_is_solenoidal(grid3):
    v = random_solenoidal(grid3, seed=1, band=(1, 4))
    E = random_real(grid3, (3, 3), seed=2, band=(1, 4))
    dv, _ = sy.rhs_vE(grid3, sy.State(grid3, v, E), 0.5)
    assert sp.l2_norm(grid3, sp.divergence(grid3, dv)) <= 1e-13 * sp.l2_norm(grid3, dv)


def test_linear_terms_only(grid2):
    v = random_solenoidal(grid2, seed=3)
    E = random_real(grid2, (2, 2), seed=4)
    dv, dE = sy.explicit_terms(grid2, v, E, nonlinear=False)
    assert np.allclose(dv, sp.leray_project(grid2, sp.divergence(grid2, E)), atol=1e-15)
    assert np.allclose(dE, sp.gradient(grid2, v), atol=1e-15)
    dv0, dE0 = sy.explicit_terms(grid2, v, E, nonlinear=False, coupling=False)
    assert not np.any(dv0) and not np.any(dE0)


def test_formulations_agree(admissible2):
    g = admissible2.grid
    assert sy.formulation_defect(g, admissible2, 1.0) <= 1e-12


def test_to_c_requires_mean_zero(grid2):
    E = random_real(grid2, (2, 2), seed=5)
    sy.to_c(grid2, E)
    E[0, 0, 0, 0] = 0.1
    with pytest.raises(ValueError, match="mean-zero"):
        sy.to_c(grid2, E)


def test_pressure_closes_momentum(grid2):
    v = random_solenoidal(grid2, seed=6)
    E = random_real(grid2, (2, 2), seed=7, band=(1, 6))
    state = sy.State(grid2, v, E)
    m = sy.momentum_unprojected(grid2, state)
    p = sy.pressure_recover(grid2, state)
    assert p[0, 0] == 0
    assert np.allclose(sp.gradient(grid2, p) + sp.leray_project(grid2, m), m, atol=1e-13)


def test_admissible_residuals(admissible2):
    res = sy.constraint_residuals(admissible2.grid, admissible2)
    assert res.within(**idt.WARMUP_TOLERANCES)
    assert set(res.as_dict()) == {"det_drift", "div_ET", "curl_compat"}


def test_rest_strain_satisfies_constraints(grid3):
    res = sy.constraint_residuals(grid3, sy.State.rest(grid3))
    assert res.det_drift == 0.0 and res.div_ET == 0.0 and res.curl_compat == 0.0


def test_random_strain_violates_constraints(grid2):
    E = random_real(grid2, (2, 2), seed=8)
    res = sy.constraint_residuals(grid2, E)
    assert not res.within(1e-3, 1e-3, 1e-3)


def test_energy_balance(admissible2):
    g = admissible2.grid
    dv, dE = sy.rhs_vE(g, admissible2, 1.0)
    rate = g.volume * (np.vdot(admissible2.v, dv).real + np.vdot(admissible2.E, dE).real)
    assert rate == pytest.approx(-sy.dissipation(g, admissible2, 1.0), rel=1e-10)
    assert sy.elastic_energy(g, admissible2) > 0
