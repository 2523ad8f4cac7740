"""Nonnegative Radon measures: point atoms plus an integrable density.

A measure is discretized onto a grid by spreading each atom with a compactly
supported quartic bump kernel k(r) = (1 - (r/w)^2)^2 of width
w = max(spacing, 1/n) and renormalizing discretely so each atom keeps its
mass exactly; the density part is sampled nodewise.  The width never drops
below one grid spacing, so the discretized measure is always resolvable.

Atoms closer than one kernel width to the boundary get their kernel clipped
and renormalized over the interior nodes; the result carries a warning flag.
If the clipped kernel touches no interior node at all, the whole mass is
deposited on the nearest interior node (same flag).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import ScalarField
from .mesh import Grid, GridFunction, require_same_grid

__all__ = [
    "RadonMeasure",
    "DiscretizedMeasure",
    "PairingTrace",
    "WeakConvergenceReport",
    "total_variation",
    "mollify",
    "pair",
    "weak_convergence_check",
    "scale_measure",
]

# Midpoint-rule reference grids for density quadrature: 256 cells per side in
# 1D, halved for each extra dimension to keep the point count bounded.
_QUAD_CELLS = {1: 256, 2: 128, 3: 64}


@dataclass(frozen=True)
class RadonMeasure:
    """Atoms (location strictly inside the open unit box, mass >= 0) plus an
    optional nonnegative density given as a closed-form field."""

    atoms: tuple[tuple[tuple[float, ...], float], ...] = ()
    density: ScalarField | None = None

    def __post_init__(self):
        normalized = []
        for location, mass in self.atoms:
            loc = tuple(float(c) for c in location)
            mass = float(mass)
            if mass < 0:
                raise ValueError(f"atom mass must be nonnegative, got {mass}")
            if any(not 0.0 < c < 1.0 for c in loc):
                raise ValueError(f"atom location {loc} must lie strictly inside (0, 1)^dim")
            normalized.append((loc, mass))
        object.__setattr__(self, "atoms", tuple(normalized))

    @property
    def is_zero(self) -> bool:
        return all(m == 0.0 for _, m in self.atoms) and self.density is None


@dataclass(frozen=True, eq=False)
class DiscretizedMeasure:
    """Mollified nodal representation of a measure at regularization level n."""

    grid: Grid
    values: GridFunction
    level: int
    boundary_clipped: bool = False

    @property
    def discrete_mass(self) -> float:
        return float(np.sum(self.values.values) * self.grid.cell_volume)


def _quad_points(dim: int) -> tuple[np.ndarray, float]:
    cells = _QUAD_CELLS[dim]
    axis = (np.arange(cells) + 0.5) / cells
    mesh = np.meshgrid(*(axis,) * dim, indexing="ij")
    pts = np.stack([c.ravel() for c in mesh], axis=1)
    return pts, (1.0 / cells) ** dim


def _density_quadrature(density: ScalarField, dim: int, weight_fn=None) -> float:
    pts, vol = _quad_points(dim)
    vals = density(pts)
    if np.any(vals < 0):
        raise ValueError("measure density must be nonnegative")
    if weight_fn is not None:
        vals = vals * np.asarray(weight_fn(pts), dtype=float)
    return float(np.sum(vals) * vol)


def total_variation(mu: RadonMeasure, dim: int = 1) -> float:
    """Total mass: atom masses plus midpoint quadrature of the density."""
    total = sum(mass for _, mass in mu.atoms)
    if mu.density is not None:
        total += _density_quadrature(mu.density, dim)
    return float(total)


def mollify(mu: RadonMeasure, grid: Grid, n: int) -> DiscretizedMeasure:
    """Spread mu onto the grid with kernel width max(spacing, 1/n)."""
    if int(n) != n or n < 1:
        raise ValueError(f"regularization level must be an integer >= 1, got {n}")
    width = max(grid.spacing, 1.0 / n)
    values = np.zeros(grid.interior_count)
    clipped = False
    for location, mass in mu.atoms:
        if mass == 0.0:
            continue
        loc = np.asarray(location[: grid.dim])
        if loc.size < grid.dim:
            raise ValueError(
                f"atom location {location} has fewer coordinates than dim={grid.dim}"
            )
        if np.min(np.minimum(loc, 1.0 - loc)) < width:
            clipped = True
        r = np.linalg.norm(grid.node_coords - loc, axis=1)
        kernel = np.clip(1.0 - (r / width) ** 2, 0.0, None) ** 2
        weight = kernel.sum() * grid.cell_volume
        if weight > 0.0:
            values += (mass / weight) * kernel
        else:
            # Kernel support contains no interior node; keep the mass anyway.
            values[int(np.argmin(r))] += mass / grid.cell_volume
            clipped = True
    if mu.density is not None:
        dens = mu.density(grid.node_coords)
        if np.any(dens < 0):
            raise ValueError("measure density must be nonnegative")
        values += dens
    return DiscretizedMeasure(
        grid=grid,
        values=GridFunction(grid, values),
        level=int(n),
        boundary_clipped=clipped,
    )


def pair(mu_d: DiscretizedMeasure, phi: GridFunction) -> float:
    """Discrete pairing sum(mu_n * phi) * cell volume."""
    require_same_grid(mu_d.grid, phi.grid)
    return float(np.sum(mu_d.values.values * phi.values) * mu_d.grid.cell_volume)


def exact_pairing(mu: RadonMeasure, phi, dim: int) -> float:
    """Continuum pairing of mu with a callable test function."""
    total = 0.0
    for location, mass in mu.atoms:
        pt = np.asarray(location[:dim], dtype=float).reshape(1, dim)
        total += mass * float(np.asarray(phi(pt)).ravel()[0])
    if mu.density is not None:
        total += _density_quadrature(mu.density, dim, weight_fn=phi)
    return total


@dataclass(frozen=True)
class PairingTrace:
    """Pairings of mollified measures against one test function along a
    refinement schedule, with gaps to the exact pairing."""

    exact: float
    levels: tuple[int, ...]
    cells: tuple[int, ...]
    pairings: tuple[float, ...]
    gaps: tuple[float, ...]
    gaps_decreasing: bool


@dataclass(frozen=True)
class WeakConvergenceReport:
    traces: tuple[PairingTrace, ...]


def weak_convergence_check(
    mu: RadonMeasure,
    grid_sequence,
    test_functions,
) -> WeakConvergenceReport:
    """Pair mu_n against each test function along n = 2, 4, 8, ... with the
    grids refined in lockstep; purely diagnostic."""
    grids = list(grid_sequence)
    if not grids:
        raise ValueError("grid_sequence must not be empty")
    dim = grids[0].dim
    levels = tuple(2 ** (j + 1) for j in range(len(grids)))
    traces = []
    for phi in test_functions:
        exact = exact_pairing(mu, phi, dim)
        pairings = []
        for n, grid in zip(levels, grids):
            mu_d = mollify(mu, grid, n)
            phi_h = GridFunction(grid, np.asarray(phi(grid.node_coords), dtype=float))
            pairings.append(pair(mu_d, phi_h))
        gaps = tuple(abs(p - exact) for p in pairings)
        decreasing = all(b <= a + 1e-15 for a, b in zip(gaps, gaps[1:]))
        traces.append(
            PairingTrace(
                exact=exact,
                levels=levels,
                cells=tuple(g.cells_per_side for g in grids),
                pairings=tuple(pairings),
                gaps=gaps,
                gaps_decreasing=decreasing,
            )
        )
    return WeakConvergenceReport(traces=tuple(traces))


def scale_measure(mu: RadonMeasure, factor: float) -> RadonMeasure:
    """Measure with all atom masses and the density scaled by factor >= 0."""
    if factor < 0:
        raise ValueError(f"scale factor must be nonnegative, got {factor}")
    atoms = tuple((loc, mass * factor) for loc, mass in mu.atoms)
    density = None
    if mu.density is not None:
        from .fields import scale_field

        density = scale_field(mu.density, factor)
    return RadonMeasure(atoms=atoms, density=density)
