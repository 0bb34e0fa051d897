import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kwplane.geometry import PowerLaw
from kwplane.grid import build_grid
from kwplane.oracle import (
    RadialProfile,
    growth_fit,
    manufactured_instance,
    radial_mesh,
    ray_profile,
    solve_radial,
)

# reference values from an independent collocation solve (scipy solve_bvp, tol 1e-11)
REF_K05_R20 = {0.0: -0.29419197, 5.0: -0.35636468, 10.0: -0.21191764}
REF_K1_R40 = {0.0: 0.64675137, 5.0: 0.40685212, 10.0: 0.27665336}


def test_homogeneous_problem_gives_zero():
    p = solve_radial(0.0, 0.0, 10.0, m=200)
    assert np.all(p.values == 0.0)


def test_balanced_coefficient_gives_zero():
    # K = -2 (1+r^2)^-3 equals the curvature of (1+|z|^2) g0, so v = 0
    p = solve_radial(PowerLaw.term(-2.0, -3.0), 1.0, 20.0, m=500)
    assert np.max(np.abs(p.values)) < 1e-13


@pytest.mark.parametrize("k,R,ref", [(0.5, 20.0, REF_K05_R20), (1.0, 40.0, REF_K1_R40)])
def test_matches_collocation_reference(k, R, ref):
    K = PowerLaw.term(-1.0, -2.0 if k == 0.5 else -3.0)
    p = solve_radial(K, k, R)
    for r, v in ref.items():
        assert float(p(r)) == pytest.approx(v, abs=2e-6)


def test_mesh_doubling_drift():
    K = PowerLaw.term(-1.0, -2.0)
    r = np.linspace(0.0, 20.0, 201)
    a = solve_radial(K, 0.5, 20.0, m=8000)(r)
    b = solve_radial(K, 0.5, 20.0, m=16000)(r)
    assert np.max(np.abs(a - b)) < 1e-6


def test_second_order_self_convergence():
    K = PowerLaw.term(-1.0, -3.0)
    r = np.linspace(0.0, 10.0, 101)
    vals = [solve_radial(K, 1.0, 10.0, m=m)(r) for m in (500, 1000, 2000, 4000)]
    d = [np.max(np.abs(vals[i] - vals[i + 1])) for i in range(3)]
    orders = np.log2(np.array(d[:-1]) / np.array(d[1:]))
    assert np.all(orders >= 1.9)


def test_stretched_mesh_agrees():
    K = PowerLaw.term(-1.0, -2.0)
    r = np.linspace(0.0, 20.0, 41)
    a = solve_radial(K, 0.5, 20.0, m=8000)(r)
    b = solve_radial(K, 0.5, 20.0, m=8000, stretch=2.0)(r)
    assert np.max(np.abs(a - b)) < 1e-5


def test_manufactured_solution_recovered():
    K, v_star = manufactured_instance(0.5, 1.0)
    p = solve_radial(K, 1.0, 20.0, m=128000, outer_value=float(v_star(20.0)))
    assert np.max(np.abs(p.values - v_star(p.r_nodes))) < 1e-8


def test_neumann_closure_finds_entire_solution():
    # K * 2 equals the curvature of (1+|z|^2) g0, so v = log 2 solves on the whole plane
    p = solve_radial(PowerLaw.term(-1.0, -3.0), 1.0, 40.0, m=2000, outer="neumann")
    np.testing.assert_allclose(p.values, np.log(2.0), atol=1e-10)


def test_rejections():
    with pytest.raises(ValueError, match="nonpositive"):
        solve_radial(PowerLaw.term(1.0, -3.0), 1.0, 10.0)
    with pytest.raises(ValueError, match="100"):
        solve_radial(0.0, 1.0, 10.0, m=50)
    with pytest.raises(ValueError):
        manufactured_instance(2.0, 1.0)


def test_profile_invariants():
    with pytest.raises(ValueError):
        RadialProfile([0.1, 1.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        RadialProfile([0.0, 1.0, 1.0], [0.0, 0.0, 0.0])
    p = RadialProfile(radial_mesh(2.0, 100), np.cos(radial_mesh(2.0, 100)))
    assert float(p(0.5)) == pytest.approx(np.cos(0.5), abs=1e-8)


def test_growth_fit_exact_log():
    r = radial_mesh(40.0, 400)
    u = np.zeros_like(r)
    u[1:] = 1.5 * np.log(r[1:])
    fit = growth_fit(RadialProfile(r, u), 1.5)
    assert fit.slope == pytest.approx(1.5, abs=1e-12)
    assert fit.max_dev == pytest.approx(0.0, abs=1e-12)


def test_growth_fit_constant():
    r = radial_mesh(40.0, 400)
    fit = growth_fit(RadialProfile(r, np.full_like(r, 3.0)), 1.0)
    assert fit.slope == pytest.approx(0.0, abs=1e-12)
    assert fit.intercept == pytest.approx(3.0)


def test_growth_fit_window_checks():
    p = RadialProfile(radial_mesh(40.0, 400), np.zeros(401))
    with pytest.raises(ValueError, match="r >= 5"):
        growth_fit(p, 1.0, (2.0, 18.0))
    with pytest.raises(ValueError, match="10"):
        growth_fit(p, 1.0, (10.0, 10.5))
    with pytest.raises(ValueError):
        growth_fit(p, 1.0, (10.0, 50.0))


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(-5, 5))
def test_growth_fit_recovers_any_log(slope, c):
    r = radial_mesh(30.0, 300)
    u = np.r_[c, slope * np.log(r[1:]) + c]
    fit = growth_fit(RadialProfile(r, u), slope, (6.0, 25.0))
    assert fit.slope == pytest.approx(slope, rel=1e-10)
    assert fit.intercept == pytest.approx(c, abs=1e-9)


def test_ray_profile_reads_positive_axis():
    from kwplane.grid import ScalarField

    g = build_grid(4.0, 41)
    u = ScalarField(np.sqrt(g.r2), g)
    p = ray_profile(u)
    np.testing.assert_allclose(p.values, p.r_nodes)
