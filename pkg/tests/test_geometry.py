import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kwplane.geometry import (
    BackgroundMetric,
    DecayCertificate,
    PowerLaw,
    PowerProfile,
    chern_scalar_curvature,
    conformal_change_curvature,
    half_laplacian,
    sample,
)
from kwplane.grid import ScalarField, build_grid


def test_flat_metric_has_zero_curvature():
    g = build_grid(5.0, 51)
    s = chern_scalar_curvature(BackgroundMetric.flat(), g)
    assert s.sup_norm() == 0.0


@pytest.mark.parametrize("k", [0.5, 1.0, 1.9])
def test_stencil_curvature_is_second_order(k):
    bg = BackgroundMetric.weighted(k)
    errs = []
    for n in (101, 201, 401):
        g = build_grid(4.0, n)
        exact = chern_scalar_curvature(bg, g, method="closed").values
        approx = chern_scalar_curvature(bg, g, method="stencil").values
        errs.append(np.max(np.abs(exact - approx)[g.interior]))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.9)


def test_sampled_background_uses_stencil():
    g = build_grid(3.0, 121)
    rho = ScalarField((1.0 + g.r2) ** 0.5, g)
    s = chern_scalar_curvature(BackgroundMetric(rho))
    exact = -1.0 * (1.0 + g.r2) ** -2.5
    assert np.max(np.abs(s.values - exact)[g.interior]) < g.spacing**2
    with pytest.raises(ValueError):
        chern_scalar_curvature(BackgroundMetric(rho), method="closed")


def test_conformal_change_between_weighted_metrics():
    # (1+|z|^2)^1.5 g0 = e^u (1+|z|^2)^0.5 g0 with u = log(1+|z|^2)
    g = build_grid(3.0, 241)
    u = ScalarField(np.log1p(g.r2), g)
    got = conformal_change_curvature(u, BackgroundMetric.weighted(0.5)).values
    want = chern_scalar_curvature(BackgroundMetric.weighted(1.5), g).values
    assert np.max(np.abs(got - want)[g.interior]) < 5e-3


def test_half_laplacian_of_quadratic():
    g = build_grid(2.0, 21)
    u = ScalarField(g.r2, g)
    lap = half_laplacian(u, BackgroundMetric.flat())
    np.testing.assert_allclose(lap.values[g.interior], 2.0, rtol=1e-10)
    assert np.all(lap.values[~g.interior] == 0.0)


def test_power_profile_algebra():
    p = PowerProfile(2.0, -1.0) * PowerProfile(3.0, -2.0)
    assert (p.coefficient, p.exponent) == (6.0, -3.0)
    assert (p**2).exponent == -6.0
    with pytest.raises(ValueError):
        PowerProfile(-1.0, 0.0)
    law = -PowerProfile(1.0, -3.0)
    assert law.radial(0.0) == -1.0


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.tuples(st.floats(-5, 5), st.floats(-4, 1)), min_size=1, max_size=4),
    st.floats(0.0, 50.0),
    st.floats(-3, 3),
)
def test_power_law_is_linear(terms, r, s):
    law = PowerLaw(tuple(terms))
    direct = sum(c * (1 + r * r) ** e for c, e in terms)
    assert law.radial(r) == pytest.approx(direct, rel=1e-12, abs=1e-12)
    assert (s * law).radial(r) == pytest.approx(s * direct, rel=1e-12, abs=1e-12)
    assert (law - law).radial(r) == pytest.approx(0.0, abs=1e-12)


def test_sample_interpolates_foreign_grid():
    coarse = build_grid(2.0, 21)
    fine = build_grid(1.0, 21)
    u = ScalarField(coarse.xy[0] + 2 * coarse.xy[1], coarse)
    np.testing.assert_allclose(sample(u, fine), fine.xy[0] + 2 * fine.xy[1], atol=1e-12)
    assert np.array_equal(sample(u, coarse), u.values)


def test_certificate_ratio():
    g = build_grid(10.0, 41)
    cert = DecayCertificate(2.0, 3.0)
    vals = -(1.0 + g.r2) ** -3.0
    assert cert.worst_ratio(vals, g) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        DecayCertificate(1.0, 1.0)
