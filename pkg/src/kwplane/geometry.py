"""Conformal metrics on the plane and their Chern scalar curvature.

Convention used throughout the package: for the flat metric the operator
``sqrt(-1) Lambda d dbar`` acts as one half of the flat Laplacian, so on a
metric ``g = rho * g0`` it is ``0.5 / rho * (d_xx + d_yy)``. The classical
form ``Lap u + K e^{2u} = 0`` is recovered by substituting ``u -> 2u``.
"""

from __future__ import annotations

from dataclasses import dataclass
from numbers import Real
from typing import Callable, Union

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .grid import GridMismatchError, GridSpec, ScalarField


@dataclass(frozen=True)
class PowerProfile:
    """Positive radial weight ``coefficient * (1 + |z|^2) ** exponent``."""

    coefficient: float
    exponent: float

    def __post_init__(self):
        if not (np.isfinite(self.coefficient) and self.coefficient > 0):
            raise ValueError(f"PowerProfile coefficient must be > 0, got {self.coefficient}")
        if not np.isfinite(self.exponent):
            raise ValueError("PowerProfile exponent must be finite")

    def __call__(self, x, y=0.0):
        return self.radial_sq(np.asarray(x) ** 2 + np.asarray(y) ** 2)

    def radial(self, r):
        return self.radial_sq(np.asarray(r, dtype=float) ** 2)

    def radial_sq(self, r2):
        return self.coefficient * (1.0 + r2) ** self.exponent

    def __mul__(self, other):
        if isinstance(other, PowerProfile):
            return PowerProfile(self.coefficient * other.coefficient, self.exponent + other.exponent)
        if isinstance(other, Real) and other > 0:
            return PowerProfile(self.coefficient * other, self.exponent)
        return NotImplemented

    __rmul__ = __mul__

    def __pow__(self, p: float) -> "PowerProfile":
        return PowerProfile(self.coefficient**p, self.exponent * p)

    def __neg__(self) -> "PowerLaw":
        return -self.as_law()

    def as_law(self) -> "PowerLaw":
        return PowerLaw(((self.coefficient, self.exponent),))


@dataclass(frozen=True)
class PowerLaw:
    """Finite signed sum ``sum_i c_i (1 + |z|^2) ** e_i``.

    Used for right-hand sides and coefficients that may change sign, for
    instance ``-(1 + |z|^2) ** -3`` or ``curvature - lambda / 2``.
    """

    terms: tuple

    def __post_init__(self):
        terms = tuple((float(c), float(e)) for c, e in self.terms)
        object.__setattr__(self, "terms", terms)

    @classmethod
    def term(cls, coefficient: float, exponent: float = 0.0) -> "PowerLaw":
        return cls(((coefficient, exponent),))

    @classmethod
    def constant(cls, value: float) -> "PowerLaw":
        return cls.term(value, 0.0)

    def __call__(self, x, y=0.0):
        return self.radial_sq(np.asarray(x) ** 2 + np.asarray(y) ** 2)

    def radial(self, r):
        return self.radial_sq(np.asarray(r, dtype=float) ** 2)

    def radial_sq(self, r2):
        out = np.zeros(np.shape(r2))
        for c, e in self.terms:
            out = out + c * (1.0 + r2) ** e
        return out

    def __neg__(self):
        return PowerLaw(tuple((-c, e) for c, e in self.terms))

    def __add__(self, other):
        other = as_power_law(other)
        if other is None:
            return NotImplemented
        return PowerLaw(self.terms + other.terms)

    __radd__ = __add__

    def __sub__(self, other):
        other = as_power_law(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, s):
        if isinstance(s, Real):
            return PowerLaw(tuple((s * c, e) for c, e in self.terms))
        return NotImplemented

    __rmul__ = __mul__


def as_power_law(obj):
    """``obj`` as a :class:`PowerLaw` if it is a profile, law or real; None otherwise."""
    if isinstance(obj, PowerLaw):
        return obj
    if isinstance(obj, PowerProfile):
        return obj.as_law()
    if isinstance(obj, Real):
        return PowerLaw.constant(float(obj))
    return None


FieldSource = Union[ScalarField, PowerProfile, PowerLaw, Callable, float]


def sample(source: FieldSource, grid: GridSpec) -> np.ndarray:
    """Values of ``source`` on every node of ``grid``.

    Sampled fields on a different grid are interpolated bilinearly and
    extended by zero outside their own square.
    """
    x, y = grid.xy
    if isinstance(source, ScalarField):
        if source.grid.same_nodes(grid):
            return np.array(source.values)
        interp = RegularGridInterpolator(
            (source.grid.coords, source.grid.coords),
            source.values,
            bounds_error=False,
            fill_value=0.0,
        )
        pts = np.stack([x.ravel(), y.ravel()], axis=-1)
        return interp(pts).reshape(x.shape)
    if isinstance(source, Real):
        return np.full(x.shape, float(source))
    if callable(source):
        return np.broadcast_to(np.asarray(source(x, y), dtype=float), x.shape).copy()
    raise TypeError(f"cannot sample {type(source).__name__} on a grid")


@dataclass(frozen=True)
class DecayCertificate:
    """Claim ``|F(z)| <= lam * (1 + |z|^2) ** (-l)``."""

    lam: float
    l: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"certificate constant must be positive, got {self.lam}")
        if not self.l > 1:
            raise ValueError(f"certificate decay power must exceed 1, got {self.l}")

    def bound(self, grid: GridSpec) -> np.ndarray:
        return self.lam * (1.0 + grid.r2) ** (-self.l)

    def worst_ratio(self, values: np.ndarray, grid: GridSpec) -> float:
        """max over nodes of ``|F| / bound``; the certificate holds iff <= 1."""
        return float(np.max(np.abs(values) / self.bound(grid)))


@dataclass(frozen=True)
class BackgroundMetric:
    """Conformal metric ``g = rho * g0`` on the plane."""

    conformal_factor: Union[PowerProfile, ScalarField]

    def __post_init__(self):
        cf = self.conformal_factor
        if isinstance(cf, ScalarField) and np.any(cf.values <= 0):
            raise ValueError("conformal factor must be strictly positive")
        if not isinstance(cf, (PowerProfile, ScalarField)):
            raise TypeError("conformal factor must be a PowerProfile or a ScalarField")

    @classmethod
    def flat(cls) -> "BackgroundMetric":
        return cls(PowerProfile(1.0, 0.0))

    @classmethod
    def weighted(cls, k: float) -> "BackgroundMetric":
        """The metric ``(1 + |z|^2)^k g0``."""
        return cls(PowerProfile(1.0, float(k)))

    @property
    def is_power(self) -> bool:
        return isinstance(self.conformal_factor, PowerProfile)

    @property
    def k(self) -> float:
        if not self.is_power:
            raise AttributeError("sampled background has no power exponent")
        return self.conformal_factor.exponent

    def rho(self, grid: GridSpec) -> np.ndarray:
        cf = self.conformal_factor
        if isinstance(cf, PowerProfile):
            return cf.radial_sq(grid.r2)
        if not cf.grid.same_nodes(grid):
            raise GridMismatchError("sampled conformal factor lives on a different grid")
        return np.array(cf.values)

    def describe(self) -> dict:
        cf = self.conformal_factor
        if isinstance(cf, PowerProfile):
            return {"coefficient": cf.coefficient, "exponent": cf.exponent}
        return {"sampled": True, "grid": cf.grid.describe()}


def _stencil(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    h2 = grid.spacing**2
    out = np.zeros_like(values)
    out[1:-1, 1:-1] = (
        values[2:, 1:-1] + values[:-2, 1:-1] + values[1:-1, 2:] + values[1:-1, :-2]
        - 4.0 * values[1:-1, 1:-1]
    ) / h2
    out[~grid.interior] = 0.0
    return out


def half_laplacian(u: ScalarField, bg: BackgroundMetric) -> ScalarField:
    """``0.5 / rho * Lap_h u`` on interior nodes, zero on boundary nodes.

    The stencil reads the actual values of ``u`` at boundary nodes.
    """
    rho = bg.rho(u.grid)
    return u.with_values(0.5 * _stencil(u.values, u.grid) / rho)


def chern_scalar_curvature(
    bg: BackgroundMetric, grid: GridSpec | None = None, method: str = "auto"
) -> ScalarField:
    """Chern scalar curvature ``-0.5 / rho * Lap log rho`` of ``bg``.

    For ``rho = c (1 + |z|^2)^k`` the closed form ``-(2k/c) (1 + |z|^2)^-(k+2)``
    is evaluated at every node. ``method="stencil"`` (automatic for sampled
    factors) applies the 5-point stencil to ``log rho`` instead; boundary
    nodes are then zero.
    """
    cf = bg.conformal_factor
    if grid is None:
        if isinstance(cf, PowerProfile):
            raise ValueError("a grid is required to sample a power-law background")
        grid = cf.grid
    if method not in ("auto", "closed", "stencil"):
        raise ValueError(f"unknown curvature method {method!r}")
    if method == "closed" and not bg.is_power:
        raise ValueError("closed-form curvature needs a PowerProfile background")
    if bg.is_power and method != "stencil":
        k, c = cf.exponent, cf.coefficient
        vals = -(2.0 * k / c) * (1.0 + grid.r2) ** (-(k + 2.0))
        return ScalarField(vals, grid, bg)
    rho = bg.rho(grid)
    if np.any(rho <= 0):
        raise ValueError("conformal factor must be strictly positive")
    return ScalarField(-0.5 * _stencil(np.log(rho), grid) / rho, grid, bg)


def conformal_change_curvature(u: ScalarField, bg: BackgroundMetric) -> ScalarField:
    """Curvature of ``e^u g``: ``e^{-u} (S_g - 0.5 / rho * Lap u)``."""
    s = chern_scalar_curvature(bg, u.grid)
    lap = half_laplacian(u, bg)
    return u.with_values(np.exp(-u.values) * (s.values - lap.values))


def volume_weight(bg: BackgroundMetric, grid: GridSpec) -> np.ndarray:
    """Density of the volume form of ``bg`` against ``dx dy``."""
    return bg.rho(grid)
