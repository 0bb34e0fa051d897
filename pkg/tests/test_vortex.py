import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kwplane.discretize import Schedule
from kwplane.geometry import BackgroundMetric, DecayCertificate, PowerLaw, PowerProfile, half_laplacian
from kwplane.grid import GridSpec, ScalarField, build_grid
from kwplane.oracle import ray_profile, solve_radial
from kwplane.solver import residual_field, solve_dirichlet
from kwplane.vortex import (
    VortexData,
    VortexDataError,
    power_law_vortex,
    reduce_to_scalar,
    solve_vortex,
    trivial_vortex,
    vortex_residual,
)

FAST = Schedule(radii=(10.0,), n=101)


def test_trivial_vortex_solution_is_zero():
    rep = solve_vortex(trivial_vortex(), FAST)
    assert rep.solution.sup_norm() == 0.0
    assert rep.bounds_checked["vortex_residual"] <= 1e-12


def test_reduction_of_trivial_data():
    p = reduce_to_scalar(trivial_vortex())
    g = build_grid(5.0, 11)
    f, h, _ = p.sampled(g)
    assert np.all(f == -1.0) and np.all(h == -1.0)


def test_reduction_subtracts_half_lambda():
    d = VortexData(curvature_K=PowerLaw.term(-1.0, -2.0), section_sq=PowerProfile(4.0, -2.0),
                   lambda_target=PowerLaw.term(1.0, -3.0))
    p = reduce_to_scalar(d)
    g = build_grid(4.0, 21)
    f, h, _ = p.sampled(g)
    t = 1.0 + g.r2
    assert np.allclose(f, -(t**-2.0) - 0.5 * t**-3.0, rtol=0, atol=1e-15)
    assert np.allclose(h, -2.0 * t**-2.0, rtol=0, atol=1e-15)


def test_sampled_inputs_are_reduced_on_their_grid():
    g = build_grid(5.0, 31)
    sec = ScalarField(2.0 * np.exp(-g.r2), g)
    p = reduce_to_scalar(VortexData(curvature_K=-1.0, section_sq=sec))
    _, h, _ = p.sampled(g)
    assert np.allclose(h, -np.exp(-g.r2))


def test_zero_section_rejected():
    with pytest.raises(VortexDataError, match="vanishes") as err:
        reduce_to_scalar(VortexData(curvature_K=-1.0, section_sq=0.0))
    assert err.value.certificate == "section"


def test_negative_section_rejected():
    with pytest.raises(VortexDataError) as err:
        reduce_to_scalar(VortexData(curvature_K=-1.0, section_sq=PowerLaw.term(-1.0, -2.0)))
    assert err.value.certificate == "section"


def test_sign_violation_rejected():
    d = VortexData(curvature_K=PowerLaw.term(1.0, -2.0), section_sq=PowerProfile(1.0, -2.0))
    with pytest.raises(VortexDataError) as err:
        reduce_to_scalar(d)
    assert err.value.certificate == "sign"


def test_lambda_can_restore_the_sign():
    # int curvature dvol = pi, lambda/2 = 2 (1+|z|^2)^-2 contributes -2 pi
    d = VortexData(curvature_K=PowerLaw.term(1.0, -2.0), section_sq=PowerProfile(1.0, -2.0),
                   lambda_target=PowerLaw.term(4.0, -2.0))
    reduce_to_scalar(d)


def test_decay_violation_rejected():
    d = VortexData(curvature_K=PowerLaw.term(-1.0, -1.5), section_sq=PowerProfile(1.0, -2.0),
                   certificate=DecayCertificate(4.0, 2.0))
    with pytest.raises(VortexDataError) as err:
        reduce_to_scalar(d)
    assert err.value.certificate == "decay"


def test_power_law_instance_accepted():
    p = reduce_to_scalar(power_law_vortex(l=2.0, k=0.5))
    assert p.check(build_grid(10.0, 41))["ok"]


def test_power_law_vortex_residual_and_round_trip():
    rep = solve_vortex(power_law_vortex(), FAST)
    assert rep.converged
    assert rep.bounds_checked["vortex_residual"] <= 1e-6
    assert rep.bounds_checked["round_trip"] <= 1e-12


@pytest.mark.parametrize("k", [0.0, 0.5, 0.9])
def test_bounded_solution_for_weighted_backgrounds(k):
    d = VortexData(PowerLaw.term(-1.0, -2.0), PowerProfile(1.0, -2.0), 0.0, BackgroundMetric.weighted(k))
    rep = solve_vortex(d, FAST)
    assert rep.converged and np.isfinite(rep.solution.sup_norm())
    assert rep.bounds_checked["vortex_residual"] <= 1e-6


def test_power_law_vortex_matches_radial_oracle():
    # the reduced problem is radial: K = -|phi|^2 / 2, right side = curvature
    k, R = 0.5, 10.0
    g = GridSpec(R, 201, "disk")
    p = reduce_to_scalar(power_law_vortex(k=k))
    rep = solve_vortex(power_law_vortex(k=k), Schedule(radii=(R,), n=201, shape="disk"))
    ref = solve_radial(PowerLaw.term(-0.5, -2.0), k, R, rhs=PowerLaw.term(-1.0, -2.0))
    ray = ray_profile(rep.solution)
    assert np.max(np.abs(ray.values - ref(ray.r_nodes))) <= 1e-3
    assert residual_field(rep.solution, p).sup_norm(interior_only=True) <= 1e-6
    assert rep.solution.grid.same_nodes(g)


@settings(max_examples=25, deadline=None)
@given(st.floats(-2.0, 2.0), st.floats(0.1, 3.0), st.floats(0.0, 2.0))
def test_round_trip_identity(amp, sec_scale, lam):
    # vortex residual is the negated scalar residual for any field, solved or not
    g = build_grid(4.0, 21)
    d = VortexData(curvature_K=PowerLaw.term(-1.0, -2.0), section_sq=PowerProfile(sec_scale, -2.0),
                   lambda_target=lam, bg=BackgroundMetric.weighted(0.5))
    p = reduce_to_scalar(d, check_grid=g)
    u = ScalarField(np.where(g.interior, amp * np.exp(-g.r2), 0.0), g)
    v = vortex_residual(u, d).values
    s = residual_field(u, p).values
    assert np.max(np.abs(v + s)) <= 1e-12 * (1.0 + np.max(np.abs(s)))


@pytest.mark.parametrize("c", [-1.0, 0.5])
def test_gauge_shift_at_residual_level(c):
    # K -> e^c K scales |phi|^2 by e^c and leaves the curvature alone; f - c then
    # solves the interior equation. Dirichlet data pin f = 0 on the boundary, so
    # the shift is checked on the residual, with the stencil reading true boundary values.
    g = build_grid(8.0, 81)
    d = power_law_vortex()
    f = solve_dirichlet(reduce_to_scalar(d), g, 0.0, schedule=Schedule(radii=(8.0,), n=81))
    f_shift = f.with_values(f.values - c)
    t = 1.0 + g.r2
    res = -(t**-2.0) - half_laplacian(f_shift, d.bg).values + 0.5 * np.exp(c) * t**-2.0 * np.exp(f_shift.values)
    base = vortex_residual(f, d).values
    assert np.max(np.abs(res - base)[g.interior]) <= 1e-12
    assert np.max(np.abs(res[g.interior])) <= 1e-8
