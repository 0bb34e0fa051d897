"""Radial reference solver and logarithmic growth fits.

For radial data on ``(1+r^2)^k g0`` the scalar equation becomes the two-point
problem

    0.5 (1+r^2)^-k (v'' + v'/r) + K(r) e^v = F(r),   v'(0) = 0,  v(R) = 0,

with ``F = -2k (1+r^2)^-(k+2)`` unless given. It is discretized by a
finite-volume scheme on a (possibly stretched) 1-D mesh and solved by damped
Newton with banded linear algebra; nothing is shared with the 2-D solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Union

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from .geometry import PowerLaw, PowerProfile
from .grid import GridSpec, ScalarField

RadialSource = Union[PowerProfile, PowerLaw, Callable, float]


class RadialSolveError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Values ``v(r)`` on nodes ``0 = r_0 < r_1 < ...``."""

    r_nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        r = np.array(self.r_nodes, dtype=float)
        v = np.array(self.values, dtype=float)
        if r.ndim != 1 or r.shape != v.shape or r.size < 2:
            raise ValueError("r_nodes and values must be 1-D arrays of equal length >= 2")
        if r[0] != 0.0:
            raise ValueError("r_nodes must start at 0")
        if np.any(np.diff(r) <= 0):
            raise ValueError("r_nodes must be strictly increasing")
        r.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "r_nodes", r)
        object.__setattr__(self, "values", v)

    @property
    def radius(self) -> float:
        return float(self.r_nodes[-1])

    def spline(self) -> CubicSpline:
        # clamped at the origin: the profile is even in r
        return CubicSpline(self.r_nodes, self.values, bc_type=((1, 0.0), "not-a-knot"), extrapolate=False)

    def __call__(self, r):
        return self.spline()(np.asarray(r, dtype=float))

    def on_grid(self, grid: GridSpec, outside: float = 0.0) -> ScalarField:
        """Sample ``v(|z|)`` on every node; nodes beyond the mesh get ``outside``."""
        r = np.sqrt(grid.r2)
        vals = self.spline()(np.minimum(r, self.radius))
        vals = np.where(r <= self.radius, vals, outside)
        return ScalarField(vals, grid)

    def to_rows(self) -> np.ndarray:
        return np.column_stack([self.r_nodes, self.values])


def _radial(src: RadialSource) -> Callable:
    if isinstance(src, (PowerProfile, PowerLaw)):
        return src.radial
    if callable(src):
        return lambda r: np.broadcast_to(np.asarray(src(r), dtype=float), np.shape(r))
    return lambda r: np.full(np.shape(r), float(src))


def radial_mesh(R: float, m: int, stretch: float = 0.0) -> np.ndarray:
    """``m + 1`` nodes on ``[0, R]``; ``stretch > 0`` grades them geometrically toward ``R``."""
    t = np.linspace(0.0, 1.0, m + 1)
    if stretch > 0:
        t = np.expm1(stretch * t) / math.expm1(stretch)
    r = R * t
    r[-1] = R
    return r


def solve_radial(
    K: RadialSource,
    k: float,
    R: float,
    m: int = 8000,
    stretch: float = 0.0,
    rhs: Optional[RadialSource] = None,
    outer_value: float = 0.0,
    outer: str = "dirichlet",
    tol: float = 1e-12,
    max_iter: int = 100,
) -> RadialProfile:
    """Radial solution on ``[0, R]`` of the weighted scalar equation.

    Parameters
    ----------
    K : radial source
        Nonpositive coefficient of ``e^v``.
    k : float
        Background exponent; ``rho = (1+r^2)^k``.
    m : int
        Number of mesh intervals (>= 100).
    stretch : float
        Geometric grading of the mesh; 0 is uniform.
    rhs : radial source, optional
        Right side ``F``; defaults to the curvature ``-2k (1+r^2)^-(k+2)``.
    outer : {"dirichlet", "neumann"}
        ``v(R) = outer_value`` or ``v'(R) = 0``.
    tol : float
        Target sup-norm residual. When the stencil entries are so large that
        rounding alone exceeds ``tol``, Newton stops at that rounding floor.

    Each node owns the control volume between the midpoints of its
    neighbouring intervals; the origin cell is the disk of radius ``r_1/2``,
    which builds in ``v'(0) = 0``.
    """
    if m < 100:
        raise ValueError(f"radial mesh needs at least 100 intervals, got {m}")
    if outer not in ("dirichlet", "neumann"):
        raise ValueError(f"unknown outer condition {outer!r}")
    r = radial_mesh(R, m, stretch)
    Kv = _radial(K)(r)
    if np.any(Kv > 0):
        raise ValueError("K must be nonpositive on [0, R]")
    F = -2.0 * k * (1.0 + r * r) ** (-(k + 2.0)) if rhs is None else _radial(rhs)(r)
    rho = (1.0 + r * r) ** k

    dr = np.diff(r)
    mid = 0.5 * (r[:-1] + r[1:])
    cond = mid / dr  # flux coefficient across each interval
    edges = np.concatenate([[0.0], mid, [R]])
    vol = 0.5 * (edges[1:] ** 2 - edges[:-1] ** 2)
    # the operator: (0.5 / rho / vol) * sum of fluxes
    scale = 0.5 / (rho * vol)
    lower = np.zeros(m + 1)
    upper = np.zeros(m + 1)
    lower[1:] = cond * scale[1:]
    upper[:-1] = cond * scale[:-1]
    diag = -(lower + upper)

    n_unk = m + 1 if outer == "neumann" else m

    def apply(v):
        out = diag * v
        out[1:] += lower[1:] * v[:-1]
        out[:-1] += upper[:-1] * v[1:]
        return out

    v = np.zeros(m + 1)
    if outer == "dirichlet":
        v[-1] = outer_value

    def residual(v):
        return (apply(v) + Kv * np.exp(v) - F)[:n_unk]

    def floor(v):
        # rounding level of the stencil; residuals below it cannot be resolved
        return 64.0 * np.finfo(float).eps * float(np.max(np.abs(diag))) * (1.0 + float(np.max(np.abs(v))))

    res = residual(v)
    nrm = float(np.max(np.abs(res)))
    for _ in range(max_iter):
        if nrm <= tol:
            break
        ab = np.zeros((3, n_unk))
        ab[0, 1:] = upper[: n_unk - 1]
        ab[1] = diag[:n_unk] + Kv[:n_unk] * np.exp(v[:n_unk])
        ab[2, :-1] = lower[1:n_unk]
        step = solve_banded((1, 1), ab, -res)
        t = 1.0
        for _ in range(40):
            trial = v.copy()
            trial[:n_unk] += t * step
            r_try = residual(trial)
            n_try = float(np.max(np.abs(r_try)))
            if np.isfinite(n_try) and n_try < nrm:
                break
            t *= 0.5
        else:
            if nrm <= floor(v):
                break
            raise RadialSolveError(f"radial Newton stalled at residual {nrm:.3e}")
        v, res, nrm = trial, r_try, n_try
    else:
        raise RadialSolveError(f"radial Newton did not converge (residual {nrm:.3e})")
    if nrm > max(tol, floor(v)):
        raise RadialSolveError(f"radial Newton did not converge (residual {nrm:.3e})")
    return RadialProfile(r, v)


def manufactured_instance(amplitude: float, k: float):
    """Coefficient ``K`` for which ``v*(r) = amplitude / (1 + r^2)`` solves the weighted equation.

    Returns ``(K, v_star)`` as radial callables. ``K <= 0`` requires
    ``|amplitude| <= k``.
    """
    a = float(amplitude)
    if abs(a) > k:
        raise ValueError("|amplitude| must not exceed k for a nonpositive K")

    def v_star(r):
        return a / (1.0 + np.asarray(r, dtype=float) ** 2)

    def K(r):
        t = np.asarray(r, dtype=float) ** 2
        return -2.0 * (1.0 + t) ** (-k - 3.0) * ((k + a) * t + k - a) * np.exp(-v_star(r))

    return K, v_star


def planar(radial_fn: Callable) -> Callable:
    """Lift a radial function ``g(r)`` to ``g(|z|)`` as a callable of ``(x, y)``."""
    return lambda x, y: radial_fn(np.hypot(x, y))


class GrowthFit(NamedTuple):
    slope: float
    intercept: float
    max_dev: float


def growth_fit(profile: RadialProfile, k: float, window=(10.0, 18.0)) -> GrowthFit:
    """Least-squares fit of ``u(r)`` against ``log r`` over the mesh nodes in ``window``.

    ``max_dev`` is the largest deviation of ``u - k log r`` from its mean
    over the window, zero exactly when ``u = k log r + const`` there.
    """
    r_lo, r_hi = map(float, window)
    if r_lo < 5.0:
        raise ValueError(f"growth window must start at r >= 5, got {r_lo}")
    if r_hi > profile.radius or r_hi <= r_lo:
        raise ValueError(f"growth window ({r_lo}, {r_hi}) not inside the mesh [0, {profile.radius}]")
    sel = (profile.r_nodes >= r_lo) & (profile.r_nodes <= r_hi)
    if int(sel.sum()) < 10:
        raise ValueError(f"growth window holds {int(sel.sum())} nodes, need at least 10")
    lr = np.log(profile.r_nodes[sel])
    u = profile.values[sel]
    slope, intercept = np.polyfit(lr, u, 1)
    dev = u - k * lr
    return GrowthFit(float(slope), float(intercept), float(np.max(np.abs(dev - dev.mean()))))


def ray_profile(field: ScalarField) -> RadialProfile:
    """Values of a grid field along the ray ``y = 0, x >= 0``."""
    c = field.grid.n // 2
    return RadialProfile(field.grid.coords[c:], field.values[c:, c])
