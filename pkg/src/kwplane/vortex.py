"""Abelian vortices on a trivial line bundle over the plane.

A Hermitian structure ``H = e^f K`` solves the vortex equation

    sqrt(-1) Lambda F_H + 0.5 |phi|^2_H = lambda / 2

exactly when ``f`` solves the scalar problem with ``h = -|phi|^2_K / 2`` and
right side ``sqrt(-1) Lambda F_K - lambda / 2``. The bundle enters only
through the two scalars ``sqrt(-1) Lambda F_K`` and ``|phi|^2_K``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from numbers import Real
from typing import Optional

import numpy as np

from .discretize import Schedule, dirichlet_laplacian_apply, integrate_plane, trapezoid_weights
from .geometry import (
    BackgroundMetric,
    DecayCertificate,
    FieldSource,
    PowerLaw,
    PowerProfile,
    as_power_law,
    sample,
)
from .grid import GridSpec, ScalarField
from .solver import ProblemSpec, SolveReport, continue_domain, residual_field

CHECK_GRID = GridSpec(20.0, 201)


class VortexDataError(ValueError):
    """Vortex data violating a hypothesis; ``certificate`` names the failed one."""

    def __init__(self, message: str, certificate: str):
        super().__init__(f"{certificate}: {message}")
        self.certificate = certificate


@dataclass(frozen=True)
class VortexData:
    """Contracted curvature of ``K``, ``|phi|^2_K`` and the target ``lambda``."""

    curvature_K: FieldSource
    section_sq: FieldSource
    lambda_target: FieldSource = 0.0
    bg: BackgroundMetric = field(default_factory=BackgroundMetric.flat)
    certificate: Optional[DecayCertificate] = None


def _is_law(src) -> bool:
    return isinstance(src, (PowerLaw, PowerProfile, Real))


def _field_grid(*sources) -> Optional[GridSpec]:
    grids = [s.grid for s in sources if isinstance(s, ScalarField)]
    for g in grids[1:]:
        if not g.same_nodes(grids[0]):
            raise VortexDataError("sampled inputs live on different grids", "grid")
    return grids[0] if grids else None


def _combine(a, ca: float, b, cb: float, grid: Optional[GridSpec], bg):
    """``ca * a + cb * b`` kept symbolic where possible."""
    if _is_law(a) and _is_law(b):
        return ca * as_power_law(a) + cb * as_power_law(b)
    if grid is not None:
        return ScalarField(ca * sample(a, grid) + cb * sample(b, grid), grid, bg)
    return lambda x, y: ca * sample_point(a, x, y) + cb * sample_point(b, x, y)


def sample_point(src, x, y):
    if isinstance(src, Real):
        return np.full(np.shape(x), float(src))
    return np.asarray(src(x, y), dtype=float)


def _plane_sign(f, bg: BackgroundMetric, check_grid: GridSpec) -> float:
    """``int f dvol_g`` over the plane when ``f`` is a power law, else over ``check_grid``."""
    if _is_law(f) and bg.is_power:
        law = as_power_law(f)
        rho = bg.conformal_factor
        res = integrate_plane(lambda r: law.radial(r) * rho.radial(r))
        if res.converged:
            return res.value
        # divergent: the sign of the tail decides
        return math.copysign(math.inf, law.radial(1e6) * rho.radial(1e6))
    return float(np.sum(trapezoid_weights(check_grid) * sample(f, check_grid) * bg.rho(check_grid)))


def reduce_to_scalar(d: VortexData, check_grid: Optional[GridSpec] = None) -> ProblemSpec:
    """Scalar problem ``h = -|phi|^2 / 2``, ``f = sqrt(-1) Lambda F_K - lambda / 2``.

    The hypotheses are checked on ``check_grid`` (the grid of any sampled
    input, else a 201-node grid on ``[-20, 20]^2``).

    Raises
    ------
    VortexDataError
        If ``|phi|^2`` is negative somewhere or vanishes identically, if the
        certificate fails, or if ``int (2 sqrt(-1) Lambda F_K - lambda) dvol >= 0``.
    """
    grid = _field_grid(d.curvature_K, d.section_sq, d.lambda_target)
    check = check_grid or grid or CHECK_GRID
    sec = sample(d.section_sq, check)
    if np.any(sec < 0):
        raise VortexDataError("|phi|^2 must be nonnegative", "section")
    if not np.any(sec[check.interior] > 0):
        raise VortexDataError("|phi|^2 vanishes identically, so h = 0", "section")
    f = _combine(d.curvature_K, 1.0, d.lambda_target, -0.5, grid, d.bg)
    h = _combine(d.section_sq, -0.5, 0.0, 0.0, grid, d.bg)
    if d.certificate is not None:
        total = np.abs(sample(f, check)) + sec
        ratio = float(np.max(total / d.certificate.bound(check)))
        if ratio > 1.0 + 1e-12:
            raise VortexDataError(
                f"|curvature - lambda/2| + |phi|^2 exceeds lam (1+|z|^2)^-l by a factor {ratio:.4g} "
                f"(lam={d.certificate.lam:g}, l={d.certificate.l:g})",
                "decay",
            )
    integral = _plane_sign(f, d.bg, check)
    if not integral < 0:
        raise VortexDataError(f"int (2 curvature - lambda) dvol = {2 * integral:.6g} is not negative", "sign")
    return ProblemSpec(f=f, h=h, bg=d.bg, certificate=d.certificate)


def vortex_residual(f_sol: ScalarField, d: VortexData) -> ScalarField:
    """``sqrt(-1) Lambda F_H + |phi|^2 e^f / 2 - lambda / 2`` for ``H = e^f K``.

    Uses ``sqrt(-1) Lambda F_H = sqrt(-1) Lambda F_K - 0.5 / rho Lap f`` with the
    solver's Dirichlet Laplacian (``f`` vanishes on the boundary); zero on
    boundary nodes.
    """
    grid = f_sol.grid
    curv = sample(d.curvature_K, grid)
    sec = sample(d.section_sq, grid)
    lam = sample(d.lambda_target, grid)
    contracted_H = curv - 0.5 * dirichlet_laplacian_apply(f_sol, grid).values / d.bg.rho(grid)
    res = contracted_H + 0.5 * sec * np.exp(f_sol.values) - 0.5 * lam
    return f_sol.with_values(np.where(grid.interior, res, 0.0))


def solve_vortex(d: VortexData, schedule: Schedule, check_grid: Optional[GridSpec] = None) -> SolveReport:
    """Solve for the conformal exponent ``f`` of ``H = e^f K`` by continuation.

    The returned report carries the vortex residual (``vortex_residual``)
    and its agreement with the negated scalar residual (``round_trip``).
    """
    p = reduce_to_scalar(d, check_grid)
    rep = continue_domain(p, schedule)
    vres = vortex_residual(rep.solution, d)
    sres = residual_field(rep.solution, p)
    verdicts = dict(rep.bounds_checked)
    verdicts["vortex_residual"] = vres.sup_norm(interior_only=True)
    verdicts["round_trip"] = float(np.max(np.abs(vres.values + sres.values)))
    return replace(rep, bounds_checked=verdicts)


def trivial_vortex() -> VortexData:
    """``|phi|^2 = 2``, curvature ``-1``, ``lambda = 0`` on the flat plane; ``f = 0`` solves it."""
    return VortexData(curvature_K=-1.0, section_sq=2.0, lambda_target=0.0)


def power_law_vortex(l: float = 2.0, k: float = 0.5, lam: float = 2.0) -> VortexData:
    """Radial data with ``curvature = -(1+|z|^2)^-l``, ``|phi|^2 = (1+|z|^2)^-l``, ``lambda = 0``."""
    return VortexData(
        curvature_K=PowerLaw.term(-1.0, -l),
        section_sq=PowerProfile(1.0, -l),
        lambda_target=0.0,
        bg=BackgroundMetric.weighted(k),
        certificate=DecayCertificate(lam, l),
    )
