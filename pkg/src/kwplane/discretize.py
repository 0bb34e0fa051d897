"""Grids, continuation schedules, quadrature and the Dirichlet 5-point Laplacian."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, NamedTuple, Optional, Union

import numpy as np
import scipy.sparse as sp
from scipy import integrate

from .geometry import PowerLaw, PowerProfile, sample
from .grid import GridMismatchError, GridSpec, ScalarField, build_grid

__all__ = [
    "GridSpec",
    "Schedule",
    "PlaneIntegral",
    "DivergentIntegralError",
    "build_grid",
    "quadrature",
    "integrate_plane",
    "dirichlet_laplacian_apply",
    "laplacian_matrix",
    "gradient_energy",
    "trapezoid_weights",
    "cut_link_excess",
]


THETA_MIN = 1e-3


def _default_epsilons():
    return tuple(2.0 ** (-i) for i in range(21))


@dataclass(frozen=True)
class Schedule:
    """Exhaustion radii, regularization ladder and solver tolerances.

    ``n`` and ``shape`` fix the grid built on every radius. The ladder is
    extended by halving beyond ``epsilons[-1]`` (at most ``max_extra_rungs``
    times) until two successive iterates are Cauchy within
    ``tol_continuation``.
    """

    radii: tuple = (5.0, 10.0, 20.0, 40.0)
    epsilons: tuple = field(default_factory=_default_epsilons)
    time_step: float = 0.5
    tol_newton: float = 1e-10
    tol_continuation: float = 1e-6
    n: int = 401
    shape: str = "square"
    max_extra_rungs: int = 60
    blowup_cap: float = 1e3
    flux_ratio_cap: float = 0.5
    newton_switch: float = 1e-2
    max_newton: int = 60
    max_flow_steps: int = 200
    max_halvings: int = 30

    def __post_init__(self):
        radii = tuple(float(r) for r in self.radii)
        eps = tuple(float(e) for e in self.epsilons)
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "epsilons", eps)
        if not radii:
            raise ValueError("schedule needs at least one radius")
        if not eps:
            raise ValueError("schedule needs at least one epsilon")
        if any(r <= 0 for r in radii) or any(b <= a for a, b in zip(radii, radii[1:])):
            raise ValueError("radii must be positive and strictly increasing")
        if any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("epsilons must be positive and strictly decreasing")
        for name in ("time_step", "tol_newton", "tol_continuation", "blowup_cap", "flux_ratio_cap"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        GridSpec(radii[0], self.n, self.shape)

    @property
    def eps_min(self) -> float:
        return self.epsilons[-1]

    def grid(self, R: float) -> GridSpec:
        return build_grid(R, self.n, self.shape)

    def replace(self, **changes) -> "Schedule":
        return replace(self, **changes)

    @classmethod
    def geometric(cls, eps_min: float, **kwargs) -> "Schedule":
        """Ladder ``1, 1/2, 1/4, ...`` down to the first power of two <= ``eps_min``."""
        m = max(0, math.ceil(-math.log2(eps_min) - 1e-12))
        return cls(epsilons=tuple(2.0 ** (-i) for i in range(m + 1)), **kwargs)


class DivergentIntegralError(ArithmeticError):
    """A plane integral was detected to diverge."""


class PlaneIntegral(NamedTuple):
    value: float
    converged: bool
    tail: float
    shell_ratio: float
    r_max: float


def _radial_callable(weight) -> Callable:
    if isinstance(weight, (PowerProfile, PowerLaw)):
        return weight.radial
    if callable(weight):
        return weight
    raise TypeError("weight must be a PowerProfile, PowerLaw or radial callable")


def integrate_plane(weight, r_max: float = 1e6) -> PlaneIntegral:
    """Adaptive radial quadrature of ``weight`` over the whole plane.

    The plane is cut into the unit disk and dyadic annuli ``[2^m, 2^(m+1)]``
    up to ``r_max``; each piece is integrated with QUADPACK in the variable
    ``log r``. Convergence is decided from the ratio of the last two annulus
    masses: a ratio below one is extrapolated as a geometric tail, otherwise
    the integral is reported as divergent.
    """
    g = _radial_callable(weight)
    total, _ = integrate.quad(lambda r: 2 * np.pi * r * g(r), 0.0, 1.0, epsabs=0, epsrel=1e-12, limit=200)
    shells = []
    lo = 1.0
    while lo < r_max:
        hi = 2.0 * lo

        def shell(t):
            r = math.exp(t)
            return 2 * np.pi * r * r * g(r)

        with np.errstate(over="ignore", invalid="ignore"):
            s, _ = integrate.quad(shell, math.log(lo), math.log(hi), epsabs=0, epsrel=1e-12, limit=200)
        if not math.isfinite(s):
            # the weight overflows: certainly not integrable
            return PlaneIntegral(math.inf, False, math.inf, math.inf, hi)
        shells.append(s)
        total += s
        lo = hi
    a, b = abs(shells[-2]), abs(shells[-1])
    ratio = b / a if a > 0 else (0.0 if b == 0 else math.inf)
    if ratio < 1.0 - 1e-9:
        tail = shells[-1] * ratio / (1.0 - ratio)
        return PlaneIntegral(total + tail, True, tail, ratio, lo)
    return PlaneIntegral(math.inf if total > 0 else -math.inf, False, math.inf, ratio, lo)


def trapezoid_weights(grid: GridSpec) -> np.ndarray:
    """Cell weights for the composite rule on ``grid`` (sum = domain area)."""
    h = grid.spacing
    if grid.shape == "square":
        w1 = np.full(grid.n, h)
        w1[0] = w1[-1] = 0.5 * h
        return np.outer(w1, w1)
    return np.where(grid.r2 <= grid.radius**2, h * h, 0.0)


def quadrature(
    field: Optional[ScalarField],
    weight: Union[PowerProfile, PowerLaw, Callable, None] = None,
    grid: Optional[GridSpec] = None,
) -> float:
    """Approximate ``int field * weight dx dy``.

    With a grid: composite trapezoid rule on the square (cell-midpoint rule
    on the disk). Without a grid and with ``field`` None: the whole-plane
    integral of ``weight`` by :func:`integrate_plane`, raising
    :class:`DivergentIntegralError` when it diverges.
    """
    if grid is None and field is not None:
        grid = field.grid
    if grid is None:
        res = integrate_plane(weight if weight is not None else PowerProfile(1.0, 0.0))
        if not res.converged:
            raise DivergentIntegralError(
                f"plane integral diverges (annulus mass ratio {res.shell_ratio:.6g} >= 1)"
            )
        return res.value
    if field is not None:
        field.require_grid(grid)
        vals = field.values
    else:
        vals = 1.0
    w = 1.0 if weight is None else sample(weight, grid)
    return float(np.sum(trapezoid_weights(grid) * vals * w))


@lru_cache(maxsize=32)
def cut_link_excess(grid: GridSpec) -> np.ndarray:
    """Per node, ``sum (1/theta - 1)`` over its links to boundary nodes.

    ``theta * h`` is the distance from an interior node to the circle
    ``|z| = R`` along a grid line. The Dirichlet value is imposed on the
    circle itself rather than on the staircase node beyond it: a link of
    length ``theta h`` contributes ``-u_i / (theta h^2)`` (zero boundary
    data), which only changes the diagonal and keeps the operator
    symmetric. The solution is then second-order accurate on disks. On
    square grids every ``theta`` is 1 and the excess vanishes.
    """
    excess = np.zeros((grid.n, grid.n))
    if grid.shape == "square":
        excess.setflags(write=False)
        return excess
    mask = grid.interior
    x, y = grid.xy
    h, R = grid.spacing, grid.radius
    ii, jj = np.nonzero(mask)
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        cut = ~mask[ii + di, jj + dj]
        i, j = ii[cut], jj[cut]
        if di:
            along, across = x[i, j] * di, y[i, j]
        else:
            along, across = y[i, j] * dj, x[i, j]
        reach = np.sqrt(np.maximum(R * R - across * across, 0.0))
        theta = np.clip((reach - along) / h, THETA_MIN, 1.0)
        np.add.at(excess, (i, j), 1.0 / theta - 1.0)
    excess.setflags(write=False)
    return excess


def dirichlet_laplacian_apply(u: ScalarField, grid: GridSpec) -> ScalarField:
    """The solver's Dirichlet Laplacian: zero boundary data, zero on boundary nodes.

    This is the operator of :func:`laplacian_matrix` applied to the interior
    values of ``u``; boundary values of ``u`` are ignored.
    """
    u.require_grid(grid)
    v = np.where(grid.interior, u.values, 0.0)
    h2 = grid.spacing**2
    out = np.zeros_like(v)
    out[1:-1, 1:-1] = (v[2:, 1:-1] + v[:-2, 1:-1] + v[1:-1, 2:] + v[1:-1, :-2] - 4.0 * v[1:-1, 1:-1]) / h2
    out -= cut_link_excess(grid) * v / h2
    out[~grid.interior] = 0.0
    return u.with_values(out)


def laplacian_matrix(grid: GridSpec) -> sp.csr_matrix:
    """Sparse Dirichlet 5-point Laplacian on the interior unknowns.

    Unknowns are ordered as ``values[grid.interior]`` (C order). On disk
    grids links cut by the circle are shortened, see :func:`cut_link_excess`.
    """
    mask = grid.interior
    n = grid.n
    number = -np.ones((n, n), dtype=np.int64)
    N = int(mask.sum())
    number[mask] = np.arange(N)
    ii, jj = np.nonzero(mask)
    inv_h2 = 1.0 / grid.spacing**2
    rows = [np.arange(N)]
    cols = [np.arange(N)]
    data = [np.full(N, -4.0 * inv_h2)]
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        nb = number[ii + di, jj + dj]
        keep = nb >= 0
        rows.append(number[ii[keep], jj[keep]])
        cols.append(nb[keep])
        data.append(np.full(int(keep.sum()), inv_h2))
    data[0] = data[0] - cut_link_excess(grid)[mask] * inv_h2
    return sp.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N)
    )


def gradient_energy(values: np.ndarray, grid: GridSpec) -> float:
    """Discrete ``int |grad u|^2 dx dy`` of a field vanishing on boundary nodes.

    Sum of squared differences over all grid edges, links cut by the circle
    weighted by ``1/theta``; equal to ``-<u, L u> h^2`` with ``L`` from
    :func:`laplacian_matrix`.
    """
    dx = np.diff(values, axis=0)
    dy = np.diff(values, axis=1)
    return float(np.sum(dx * dx) + np.sum(dy * dy) + np.sum(cut_link_excess(grid) * values * values))


def check_same_grid(a: GridSpec, b: GridSpec) -> None:
    if not a.same_nodes(b):
        raise GridMismatchError("grids do not share node coordinates")
