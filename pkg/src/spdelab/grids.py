"""Uniform spatial grids carrying the density-weighted quadrature.

The computational window [x_min, x_max] truncates the real line; all data
used downstream decays fast enough that homogeneous Dirichlet behaviour at
the window edges is below quadrature tolerance.  Inner products in the
weighted space L2(1/rho dx) are trapezoidal sums with weights 1/rho.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coeffs import CoefficientField

__all__ = ["WeightedGrid", "Field", "inner_product", "weighted_norm"]


@dataclass(frozen=True)
class WeightedGrid:
    x_min: float
    x_max: float
    n: int
    nodes: np.ndarray      # strictly increasing, uniform
    h: float
    weights: np.ndarray    # 1/rho at the nodes
    quad: np.ndarray       # trapezoid factors * weights * h   (weighted measure)
    quad_dx: np.ndarray    # trapezoid factors * h             (plain dx measure)
    interface_index: int | None

    @classmethod
    def build(cls, x_min: float, x_max: float, n: int,
              field: CoefficientField) -> "WeightedGrid":
        if n < 3:
            raise ValueError(f"grid needs at least 3 nodes, got {n}")
        if not x_min < x_max:
            raise ValueError("need x_min < x_max")
        nodes = np.linspace(x_min, x_max, n)
        h = (x_max - x_min) / (n - 1)

        interface_index = None
        if field.is_piecewise:
            j0 = int(np.argmin(np.abs(nodes)))
            if abs(nodes[j0]) > 1e-9 * h:
                raise ValueError(
                    "piecewise fields need the interface x=0 on a grid node; "
                    f"nearest node sits at {nodes[j0]:.3e}")
            nodes[j0] = 0.0  # snap rounding residue so side selection is exact
            interface_index = j0

        rho, _, _ = field.tables(nodes)
        weights = 1.0 / rho
        trap = np.ones(n)
        trap[0] = trap[-1] = 0.5
        grid = cls(x_min=float(x_min), x_max=float(x_max), n=int(n),
                   nodes=nodes, h=float(h), weights=weights,
                   quad=trap * weights * h, quad_dx=trap * h,
                   interface_index=interface_index)
        return grid

    def refined(self, field: CoefficientField) -> "WeightedGrid":
        """Same window with spacing halved (node count 2n-1)."""
        return WeightedGrid.build(self.x_min, self.x_max, 2 * self.n - 1, field)

    def sample_tables(self, field: CoefficientField):
        return field.tables(self.nodes)

    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[:-1] + self.nodes[1:])


@dataclass(frozen=True)
class Field:
    """A real-valued function sampled on a grid."""

    values: np.ndarray
    grid: WeightedGrid

    def __post_init__(self):
        if np.asarray(self.values).shape != (self.grid.n,):
            raise ValueError(
                f"field has {np.asarray(self.values).shape} values for a "
                f"{self.grid.n}-node grid")

    @classmethod
    def from_callable(cls, fn, grid: WeightedGrid) -> "Field":
        return cls(np.asarray(fn(grid.nodes), dtype=float) * np.ones(grid.n), grid)


def _values(u) -> np.ndarray:
    return np.asarray(getattr(u, "values", u), dtype=float)


def inner_product(u, v, grid: WeightedGrid) -> float:
    """Weighted trapezoidal inner product: sum of u*v/rho over the window."""
    uv, vv = _values(u), _values(v)
    if uv.shape != (grid.n,) or vv.shape != (grid.n,):
        raise ValueError("inner_product arguments must live on the given grid")
    return float(np.dot(uv * vv, grid.quad))


def weighted_norm(u, grid: WeightedGrid) -> float:
    return float(np.sqrt(max(inner_product(u, u, grid), 0.0)))
