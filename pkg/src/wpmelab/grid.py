"""Radial meshes, sampled radial functions and weighted quadrature.

A grid has nodes ``0 = y_0 < ... < y_M = R_max``. Two families of cells are
used:

* *intervals* ``[y_j, y_{j+1}]`` carry the quadrature of the norms
  (trapezoidal in the values, exact in the weight mass);
* *control volumes* ``[e_{i-1/2}, e_{i+1/2}]`` around each node, with edges at
  interval midpoints, carry the finite-volume scheme.

All masses are exact integrals of ``rho * sigma_N * y**(N-1)``, so the
singularity of the weight at the origin never enters pointwise.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DomainError
from .model import WeightSpec, sphere_area, weight_cell_mass, weight_moment


@dataclass(frozen=True, eq=False)
class RadialGrid:
    nodes: np.ndarray
    N: int = 3
    weight: WeightSpec = field(default_factory=lambda: WeightSpec(gamma=0.0))

    def __post_init__(self):
        y = np.asarray(self.nodes, dtype=float)
        if y.ndim != 1 or y.size < 3:
            raise DomainError("grid needs at least three nodes")
        if y[0] != 0.0 or np.any(np.diff(y) <= 0) or not np.all(np.isfinite(y)):
            raise DomainError("nodes must start at 0 and increase strictly")
        y.setflags(write=False)
        object.__setattr__(self, "nodes", y)

    @property
    def M(self):
        """Number of intervals."""
        return self.nodes.size - 1

    @property
    def R_max(self):
        return float(self.nodes[-1])

    @cached_property
    def widths(self):
        return np.diff(self.nodes)

    @cached_property
    def cell_edges(self):
        """Control-volume edges: 0, interval midpoints, R_max."""
        y = self.nodes
        return np.concatenate([[0.0], 0.5 * (y[1:] + y[:-1]), [y[-1]]])

    @cached_property
    def cum_mass(self):
        """Weighted mass of B_{y_j} at every node (length M+1)."""
        return np.concatenate([[0.0], np.cumsum(self.interval_mass)])

    @cached_property
    def interval_mass(self):
        return self._masses(self.nodes)

    @cached_property
    def cell_weight_mass(self):
        """Weighted mass of each control volume (length M+1)."""
        return self._masses(self.cell_edges)

    def radial_moment(self, power):
        """``int y**power * rho dy`` over each interval (no sphere factor)."""
        return np.array(
            [weight_moment(self.weight, power, a, b)
             for a, b in zip(self.nodes[:-1], self.nodes[1:])]
        )

    def _masses(self, edges):
        if self.weight.is_pure_power:
            e = self.N - self.weight.gamma
            return sphere_area(self.N) * np.diff(edges**e) / e
        return np.array(
            [weight_cell_mass(self.weight, self.N, a, b) for a, b in zip(edges[:-1], edges[1:])]
        )

    def mass_to(self, R):
        """Weighted mass of the ball B_R, exact for any ``0 <= R <= R_max``."""
        R = float(R)
        if R < 0 or R > self.R_max * (1 + 1e-14):
            raise DomainError(f"radius {R} outside [0, {self.R_max}]")
        k = self.locate(R)
        if self.nodes[k] == R:
            return float(self.cum_mass[k])
        return float(self.cum_mass[k] + weight_cell_mass(self.weight, self.N, self.nodes[k], R))

    def locate(self, R):
        """Index of the last node ``<= R``."""
        return int(np.searchsorted(self.nodes, R, side="right") - 1)

    def sample(self, func):
        """GridFunction with values ``func(nodes)``."""
        return GridFunction(self, np.asarray(func(self.nodes), dtype=float))


def make_grid(R_max, M, stretch=1.0, *, N=3, weight=None):
    """Geometric mesh of ``M`` intervals with width ratio ``stretch``.

    The first width is ``R_max (s-1)/(s**M - 1)`` so the widths
    ``h0 * s**j`` sum to ``R_max``; ``stretch == 1`` is uniform.
    """
    if not (math.isfinite(R_max) and math.isfinite(stretch)):
        raise DomainError("grid parameters must be finite")
    if R_max <= 0 or M < 16 or stretch < 1:
        raise DomainError("need R_max > 0, M >= 16, stretch >= 1")
    M = int(M)
    if stretch == 1.0:
        nodes = np.linspace(0.0, R_max, M + 1)
    else:
        widths = stretch ** np.arange(M, dtype=float)
        widths *= R_max / widths.sum()
        nodes = np.concatenate([[0.0], np.cumsum(widths)])
        nodes[-1] = R_max
    return RadialGrid(nodes, N=N, weight=weight if weight is not None else WeightSpec(0.0))


@dataclass(eq=False)
class GridFunction:
    """Values of a radial function at the grid nodes."""

    grid: RadialGrid
    values: np.ndarray
    blown_up: bool = False

    def __post_init__(self):
        self.values = np.array(self.values, dtype=float)
        if self.values.shape != self.grid.nodes.shape:
            raise DomainError("values must have one entry per node")
        if not self.blown_up and not np.all(np.isfinite(self.values)):
            raise DomainError("grid function has non-finite values")

    def copy(self):
        return GridFunction(self.grid, self.values.copy(), self.blown_up)

    def with_values(self, values):
        return GridFunction(self.grid, values)

    def to_csv(self, path):
        write_csv(path, {"radius": self.grid.nodes, "value": self.values})

    @classmethod
    def from_csv(cls, path, grid=None, **grid_kwargs):
        """Read a (radius, value) CSV; resample linearly onto ``grid`` if given."""
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        r = np.array([float(row["radius"]) for row in rows])
        v = np.array([float(row["value"]) for row in rows])
        if grid is None:
            return cls(RadialGrid(r, **grid_kwargs), v)
        if grid.R_max > r[-1] * (1 + 1e-12):
            raise DomainError("CSV data does not reach the grid's outer radius")
        return cls(grid, np.interp(grid.nodes, r, v))


def write_csv(path, columns):
    """Header row of column names, then one row per entry; numbers at full precision."""
    names = list(columns)
    cols = [np.asarray(columns[n]) for n in names]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in zip(*cols):
            w.writerow([_cell(x) for x in row])


def _cell(x):
    if isinstance(x, (str, np.str_)):
        return str(x)
    return repr(float(x))


def cumulative_integral(grid, values):
    """``int_{B_{y_j}} f rho dx`` at every node, trapezoidal in ``values``."""
    v = np.asarray(values, dtype=float)
    return np.concatenate([[0.0], np.cumsum(grid.interval_mass * 0.5 * (v[1:] + v[:-1]))])


def integrate_to(grid, values, R, cum=None):
    """``int_{B_R} f rho dx`` for nodal ``values``; the cell cut by R is split exactly."""
    if R > grid.R_max * (1 + 1e-14) or R < 0:
        raise DomainError(f"radius {R} outside [0, {grid.R_max}]")
    cum = cumulative_integral(grid, values) if cum is None else cum
    k = grid.locate(R)
    y = grid.nodes
    if y[k] == R or k == grid.M:
        return float(cum[k])
    fR = values[k] + (values[k + 1] - values[k]) * (R - y[k]) / (y[k + 1] - y[k])
    part = weight_cell_mass(grid.weight, grid.N, y[k], R)
    return float(cum[k] + part * 0.5 * (values[k] + fR))


def integrate_weighted(f, R=None):
    """Weighted integral ``int_{B_R} f rho dx`` of a GridFunction."""
    R = f.grid.R_max if R is None else float(R)
    return integrate_to(f.grid, f.values, R)
