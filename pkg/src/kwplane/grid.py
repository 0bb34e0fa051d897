"""Uniform node grids on [-R, R]^2 and fields sampled on them."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Optional

import numpy as np

SHAPES = ("square", "disk")


class GridMismatchError(ValueError):
    """Two objects that must live on the same grid do not."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform ``n x n`` node grid covering ``[-R, R]^2``.

    Arrays on the grid are indexed ``values[i, j]`` with ``x = coords[i]`` and
    ``y = coords[j]``. For ``shape="disk"`` every node with ``|z| >= R`` is a
    boundary node, so the Dirichlet boundary is the lattice staircase around
    the disk.
    """

    radius: float
    n: int
    shape: str = "square"

    def __post_init__(self):
        if not np.isfinite(self.radius) or self.radius <= 0:
            raise ValueError(f"grid radius must be positive, got {self.radius}")
        if int(self.n) != self.n:
            raise ValueError(f"grid nodes must be an integer, got {self.n}")
        if self.n < 5:
            raise ValueError(f"grid nodes must be >= 5, got {self.n}")
        if self.n % 2 == 0:
            raise ValueError(f"grid nodes must be odd, got {self.n}")
        if self.shape not in SHAPES:
            raise ValueError(f"grid shape must be one of {SHAPES}, got {self.shape!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def spacing(self) -> float:
        return 2.0 * self.radius / (self.n - 1)

    @cached_property
    def coords(self) -> np.ndarray:
        c = np.linspace(-self.radius, self.radius, self.n)
        c[self.n // 2] = 0.0
        return c

    @cached_property
    def xy(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.coords, self.coords, indexing="ij")

    @cached_property
    def r2(self) -> np.ndarray:
        x, y = self.xy
        return x * x + y * y

    @cached_property
    def interior(self) -> np.ndarray:
        mask = np.zeros((self.n, self.n), dtype=bool)
        mask[1:-1, 1:-1] = True
        if self.shape == "disk":
            # nodes exactly on the circle are boundary nodes
            mask &= self.r2 < self.radius**2 * (1.0 - 1e-12)
        mask.setflags(write=False)
        return mask

    @property
    def boundary(self) -> np.ndarray:
        return ~self.interior

    @property
    def n_interior(self) -> int:
        return int(self.interior.sum())

    def same_nodes(self, other: "GridSpec") -> bool:
        """True when both grids carry identical node coordinates."""
        return self.n == other.n and np.isclose(self.radius, other.radius, rtol=0, atol=1e-12)

    def describe(self) -> dict:
        return {"radius": self.radius, "n": self.n, "shape": self.shape, "spacing": self.spacing}


def build_grid(R: float, n: int, shape: str = "square") -> GridSpec:
    """Build a grid of half-width ``R`` with ``n`` (odd, >= 5) nodes per axis."""
    return GridSpec(radius=R, n=n, shape=shape)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real values on the nodes of a :class:`GridSpec`.

    ``background`` is an optional tag naming the metric the field is meant
    to be read against; no operation depends on it.
    """

    values: np.ndarray
    grid: GridSpec
    background: Optional[Any] = field(default=None)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.n, self.grid.n):
            raise GridMismatchError(
                f"field of shape {vals.shape} does not match grid with n={self.grid.n}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite at every node")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, grid: GridSpec, background=None) -> "ScalarField":
        return cls(np.zeros((grid.n, grid.n)), grid, background)

    @classmethod
    def from_function(cls, fn, grid: GridSpec, background=None) -> "ScalarField":
        x, y = grid.xy
        vals = np.broadcast_to(np.asarray(fn(x, y), dtype=float), x.shape)
        return cls(vals, grid, background)

    def with_values(self, values) -> "ScalarField":
        return ScalarField(values, self.grid, self.background)

    def interior_values(self) -> np.ndarray:
        return self.values[self.grid.interior]

    def sup_norm(self, interior_only: bool = False) -> float:
        vals = self.interior_values() if interior_only else self.values
        return float(np.max(np.abs(vals))) if vals.size else 0.0

    def require_grid(self, grid: GridSpec) -> None:
        if not self.grid.same_nodes(grid):
            raise GridMismatchError(
                f"field lives on grid (R={self.grid.radius}, n={self.grid.n}), "
                f"expected (R={grid.radius}, n={grid.n})"
            )
