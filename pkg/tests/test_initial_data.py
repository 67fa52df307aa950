import numpy as np
import pytest

from conftest import random_real
from oldroyd import initial_data as idt
from oldroyd import spectral as sp
from oldroyd.littlewood_paley import besov_norm
from oldroyd.system import constraint_residuals


@pytest.mark.parametrize("kind", idt.KINDS)
@pytest.mark.parametrize("dim, n", [(2, 32), (3, 16)])
def test_velocity_solenoidal_and_scaled(kind, dim, n):
    g = sp.get_grid(dim, n)
    spec = idt.DataSpec(kind=kind, amplitude=0.2, band=(2, 4))
    v = idt.make_velocity(g, spec)
    assert sp.l2_norm(g, sp.divergence(g, v)) <= 1e-12
    assert np.all(sp.mean(g, v) == 0)
    assert besov_norm(g, v, dim / 2 - 1) == pytest.approx(0.2, rel=1e-12)


def test_spec_validation(grid2):
    with pytest.raises(ValueError):
        idt.DataSpec(kind="vortex")
    with pytest.raises(ValueError):
        idt.DataSpec(amplitude=0.0)
    with pytest.raises(ValueError):
        idt.DataSpec(band=(0.5, 2))
    with pytest.raises(ValueError):
        idt.DataSpec(band=(3, 2))
    with pytest.raises(ValueError):
        idt.DataSpec(warmup_time=-1.0)
    with pytest.raises(ValueError, match="cutoff"):
        idt.make_velocity(grid2, idt.DataSpec(band=(1, 20)))


def test_empty_band_rejected(grid2):
    with pytest.raises(ValueError, match="no lattice"):
        idt.random_solenoidal(grid2, (1.1, 1.3), np.random.default_rng(0))


def test_zero_warmup_gives_zero_strain(grid2):
    st = idt.make_initial_state(grid2, idt.DataSpec(warmup_time=0.0))
    assert not np.any(st.E)


def test_admissible_state_meets_tolerances(grid2, grid3):
    # 16^3 resolves only |k| <= 5: keep the carrier band well inside it
    for g, band in ((grid2, (1, 4)), (grid3, (1, 2))):
        st = idt.make_initial_state(g, idt.DataSpec(seed=4, band=band))
        assert constraint_residuals(g, st).within(**idt.WARMUP_TOLERANCES)
        assert np.any(st.E)


def test_strain_linear_in_small_amplitude(grid2):
    carrier = idt.make_velocity(grid2, idt.DataSpec(amplitude=1.0, seed=5))

    def defect(a):
        e1 = idt.warmup_strain(grid2, a * carrier, 1.0)
        e2 = idt.warmup_strain(grid2, 0.5 * a * carrier, 1.0)
        return sp.l2_norm(grid2, e2 - 0.5 * e1) / sp.l2_norm(grid2, 0.5 * e1)

    d1, d2 = defect(1e-2), defect(5e-3)
    assert d1 < 1e-2
    assert d1 / d2 == pytest.approx(2.0, rel=0.05)


def test_euler_warmup_first_order(grid2):
    carrier = idt.make_velocity(grid2, idt.DataSpec(amplitude=0.3, seed=6))
    drifts = [constraint_residuals(grid2, idt.warmup_strain(grid2, carrier, 1.0, dt, "euler")).det_drift
              for dt in (2e-2, 1e-2)]
    assert 1.8 <= drifts[0] / drifts[1] <= 2.2
    rk4 = constraint_residuals(grid2, idt.warmup_strain(grid2, carrier, 1.0, 1e-2, "rk4")).det_drift
    assert rk4 < 0.1 * drifts[1]
    with pytest.raises(ValueError):
        idt.warmup_strain(grid2, carrier, 1.0, 1e-2, "midpoint")


def test_reproducible_from_seed(grid2):
    a = idt.make_initial_state(grid2, idt.DataSpec(seed=7))
    b = idt.make_initial_state(grid2, idt.DataSpec(seed=7))
    c = idt.make_initial_state(grid2, idt.DataSpec(seed=8))
    assert np.array_equal(a.v, b.v) and np.array_equal(a.E, b.E)
    assert not np.array_equal(a.v, c.v)


def test_velocity_and_carrier_independent(grid2):
    st = idt.make_initial_state(grid2, idt.DataSpec(seed=9))
    carrier_like = idt.warmup_strain(grid2, st.v, 1.0)
    assert not np.allclose(carrier_like, st.E)


def test_inadmissible_warmup_reports_residuals(grid2):
    with pytest.raises(idt.InadmissibleData) as err:
        idt.make_initial_state(grid2, idt.DataSpec(amplitude=1.0, warmup_dt=0.1))
    assert err.value.residuals.det_drift > idt.WARMUP_TOLERANCES["det_drift"]


def test_carrier_must_be_solenoidal(grid2):
    with pytest.raises(ValueError, match="divergence-free"):
        idt.make_strain_by_warmup(grid2, idt.DataSpec(), random_real(grid2, (2,), seed=10))


def test_negative_controls(grid2):
    spec = idt.DataSpec(amplitude=1e-2)
    sym = idt.make_strain_inadmissible(grid2, spec, "symmetric")
    assert np.allclose(sym, np.swapaxes(sym, 0, 1))
    assert constraint_residuals(grid2, sym).div_ET > 1e-4
    ident = idt.make_strain_inadmissible(grid2, spec, "identity")
    assert constraint_residuals(grid2, ident).det_drift == pytest.approx(2e-2 + 1e-4, rel=1e-12)
    with pytest.raises(ValueError):
        idt.make_strain_inadmissible(grid2, spec, "random")
