import math

import numpy as np
import pytest

from oldroyd import probes as pb
from oldroyd import spectral as sp


@pytest.mark.parametrize("law", pb.LAWS)
def test_default_params_pass_side_conditions(law):
    for dim in (2, 3):
        pb.check_side_conditions(law, dim, pb.default_params(law, dim))


@pytest.mark.parametrize(
    "law, params, fragment",
    [
        ("prod_positive_s", {"s": 0.0, "r": 1.0}, "s > 0"),
        ("prod_two_index", {"s1": 1.0, "s2": 0.5, "r": 1.0}, "s1, s2 < N/p"),
        ("prod_two_index", {"s1": -0.5, "s2": 0.2, "r": 1.0}, "s1 + s2 > 0"),
        ("prod_linfty", {"s": 1.0, "r": 1.0}, "|s| < N/p"),
        ("prod_dual", {"s": -1.0}, "(-N/p, N/p]"),
        ("hybrid_Tuv", {"s": 1.5, "t": 1.0, "r": math.inf, "mu": 1.0}, "min(1 - 2/r"),
        ("hybrid_remainder", {"s": -1.0, "t": 0.5, "r": math.inf, "mu": 1.0}, "s + t > max"),
        ("commutator", {"mu": 0.0}, "mu > 0"),
    ],
)
def test_side_condition_violations_named(law, params, fragment):
    with pytest.raises(ValueError, match="side condition violated") as err:
        pb.check_side_conditions(law, 2, params)
    assert fragment in str(err.value)


def test_unknown_law():
    with pytest.raises(ValueError, match="unknown law"):
        pb.default_params("triangle", 2)


def test_random_field_properties():
    g = sp.get_grid(2, 64)
    f = pb.random_field(g, np.random.default_rng(0), (2,))
    assert f.shape == (2,) + g.shape
    assert np.all(f[:, 0, 0] == 0)
    assert np.max(np.abs(f[:, g.kabs > g.cutoff / 2])) <= 1e-14 * np.max(np.abs(f))
    real = sp.inverse_transform(g, f)
    assert np.allclose(sp.transform(g, real), f, atol=1e-15)


def test_ratio_zero_lhs():
    g = sp.get_grid(2, 32)
    zero = np.zeros(g.shape, complex)
    assert pb.law_ratio("prod_dual", g, zero, zero, pb.default_params("prod_dual", 2)) == 0.0


def test_prober_deterministic_and_finite():
    a = pb.inequality_prober("prod_positive_s", samples=10, seed=3)
    b = pb.inequality_prober("prod_positive_s", samples=10, seed=3)
    assert np.array_equal(a.ratios, b.ratios)
    assert a.finite and a.median <= a.p95 <= a.max


def test_prober_rejects_bad_params():
    with pytest.raises(ValueError, match="side condition"):
        pb.inequality_prober("prod_positive_s", samples=2, params={"s": -1.0})


def test_cross_resolution_report_format():
    cross = pb.cross_resolution("prod_dual", (32, 64), samples=5, seed=1)
    text = pb.format_report(cross)
    assert text.startswith("law: prod_dual\n")
    assert "n32: max=" in text and "n64: max=" in text
    assert f"max_change_factor: {cross.change_factor:.6g}" in text
    assert cross.change_factor >= 1.0
