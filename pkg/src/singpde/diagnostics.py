"""Discrete norms, distribution functions, tail-exponent fits and residuals.

Gradients are per-cell forward differences anchored at each cell's lower
corner, with the implicit zero boundary values filled in, so a grid with m
cells per side yields an m^dim cell field.  Superlevel-set masses are cell or
node counts times the cell volume; weak-Lebesgue tail exponents come from
least-squares fits of log(mass) against log(threshold).

Also here: the truncation energy sum |grad T_k(u)^((gamma+1)/2)|^2, the
global/local split of u into G_1(u) and T_1(u) with band-restricted energies,
the torsion function solving -Lap phi0 = 1, the smallest Laplacian eigenvalue
via inverse power iteration, and a Kato-type residual comparing the integral
of (u1 - u2)^+ against the signed source differences weighted by phi0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import ScalarField
from .measures import DiscretizedMeasure
from .mesh import Grid, GridFunction, build_laplacian, require_same_grid, solve_spd
from .singularity import SingularNonlinearity, trunc_G, trunc_T, trunc_power
from .solver import SolveResult

__all__ = [
    "DistributionSample",
    "ExponentFit",
    "G1T1Report",
    "KatoReport",
    "discrete_gradient_magnitude",
    "sobolev_norm",
    "distribution_function",
    "default_thresholds",
    "marcinkiewicz_fit",
    "truncation_energy",
    "g1_t1_split_energies",
    "torsion_function",
    "kato_residual",
    "lambda1_estimate",
]


def _full_lattice(u: GridFunction) -> np.ndarray:
    """Nodal values on the full (m+1)^dim lattice, zeros on the boundary."""
    m = u.grid.cells_per_side
    full = np.zeros((m + 1,) * u.grid.dim)
    inner = (slice(1, m),) * u.grid.dim
    full[inner] = u.reshape()
    return full


def _cell_gradients(u: GridFunction) -> list[np.ndarray]:
    """Forward-difference gradient components, one (m,)*dim array per axis."""
    grid = u.grid
    m = grid.cells_per_side
    full = _full_lattice(u)
    comps = []
    for axis in range(grid.dim):
        diff = np.diff(full, axis=axis) / grid.spacing
        # Restrict the remaining axes to the lower-corner lattice points.
        slices = tuple(
            slice(None) if a == axis else slice(0, m) for a in range(grid.dim)
        )
        comps.append(diff[slices])
    return comps


def discrete_gradient_magnitude(u: GridFunction) -> np.ndarray:
    """Euclidean magnitude of the per-cell forward-difference gradient."""
    comps = _cell_gradients(u)
    if len(comps) == 1:
        return np.abs(comps[0])
    return np.sqrt(sum(c**2 for c in comps))


def gradient_energy(u: GridFunction) -> float:
    """Sum of |grad u|^2 over cells times the cell volume."""
    comps = _cell_gradients(u)
    return float(sum(np.sum(c**2) for c in comps) * u.grid.cell_volume)


def sobolev_norm(u: GridFunction, q: float) -> float:
    """(sum_cells |grad u|^q + sum_nodes |u|^q)^(1/q), volume-weighted."""
    if q < 1:
        raise ValueError(f"q must be at least 1, got {q}")
    vol = u.grid.cell_volume
    grad = discrete_gradient_magnitude(u)
    total = float(np.sum(grad**q) * vol + np.sum(np.abs(u.values) ** q) * vol)
    return total ** (1.0 / q)


@dataclass(frozen=True)
class DistributionSample:
    """Masses of the superlevel sets {|field| >= t} for sorted thresholds."""

    thresholds: tuple[float, ...]
    masses: tuple[float, ...]

    def __post_init__(self):
        t = self.thresholds
        if any(x <= 0 for x in t):
            raise ValueError("thresholds must be positive")
        if any(b < a for a, b in zip(t, t[1:])):
            raise ValueError("thresholds must be sorted ascending")


def distribution_function(
    field, thresholds, grid: Grid | None = None
) -> DistributionSample:
    """Superlevel-set measures count(|field| >= t) * cell volume.

    ``field`` is a GridFunction (nodal) or a cell array from
    discrete_gradient_magnitude; plain arrays need ``grid`` for the volume.
    """
    if isinstance(field, GridFunction):
        values = field.values
        vol = field.grid.cell_volume
    else:
        if grid is None:
            raise ValueError("plain arrays need an explicit grid for the cell volume")
        values = np.asarray(field, dtype=float)
        vol = grid.cell_volume
    absvals = np.abs(values).ravel()
    thresholds = tuple(float(t) for t in thresholds)
    masses = tuple(float(np.count_nonzero(absvals >= t) * vol) for t in thresholds)
    return DistributionSample(thresholds=thresholds, masses=masses)


def default_thresholds(
    values,
    count: int = 16,
    lo_percentile: float = 10.0,
    hi_percentile: float = 99.9,
    floor: float | None = None,
) -> tuple[float, ...]:
    """Log-spaced thresholds between two percentiles of |values|.

    ``floor`` clamps the lower end; tail estimates are only meaningful from
    threshold 1 upward, so tail fitting passes floor=1.0.
    """
    absvals = np.abs(np.asarray(values, dtype=float)).ravel()
    positive = absvals[absvals > 0]
    if positive.size == 0:
        return ()
    lo = float(np.percentile(positive, lo_percentile))
    hi = float(np.percentile(positive, hi_percentile))
    if floor is not None:
        lo = max(lo, floor)
    if hi <= 0:
        return ()
    if lo >= hi:
        lo = hi / 10.0
    return tuple(np.geomspace(lo, hi, count))


@dataclass(frozen=True)
class ExponentFit:
    """Least-squares slope of log(mass) against log(threshold)."""

    slope: float
    intercept: float
    r_squared: float
    t_range: tuple[float, float]
    conclusive: bool = True
    target_exponent: float | None = None


def marcinkiewicz_fit(
    sample: DistributionSample, target_exponent: float | None = None
) -> ExponentFit:
    """Fit the tail exponent of a distribution sample.

    Only thresholds with positive mass enter the fit; fewer than four such
    points yields an inconclusive fit rather than a failure.
    """
    t = np.asarray(sample.thresholds, dtype=float)
    m = np.asarray(sample.masses, dtype=float)
    mask = m > 0
    if np.count_nonzero(mask) < 4:
        return ExponentFit(
            slope=float("nan"),
            intercept=float("nan"),
            r_squared=float("nan"),
            t_range=(float("nan"), float("nan")),
            conclusive=False,
            target_exponent=target_exponent,
        )
    logt = np.log(t[mask])
    logm = np.log(m[mask])
    slope, intercept = np.polyfit(logt, logm, 1)
    pred = slope * logt + intercept
    ss_res = float(np.sum((logm - pred) ** 2))
    ss_tot = float(np.sum((logm - logm.mean()) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    return ExponentFit(
        slope=float(slope),
        intercept=float(intercept),
        r_squared=r_squared,
        t_range=(float(t[mask].min()), float(t[mask].max())),
        conclusive=True,
        target_exponent=target_exponent,
    )


def truncation_energy(u: GridFunction, k: float, gamma: float) -> float:
    """Gradient energy of (T_k(u))^((gamma+1)/2) for gamma >= 1."""
    w = GridFunction(u.grid, trunc_power(k, gamma, u.values))
    return gradient_energy(w)


def _cell_center_distance(grid: Grid) -> np.ndarray:
    """Boundary distance of cell centers, shape (m,)*dim."""
    m = grid.cells_per_side
    centers = (np.arange(m) + 0.5) * grid.spacing
    axis_d = np.minimum(centers, 1.0 - centers)
    mesh = np.meshgrid(*(axis_d,) * grid.dim, indexing="ij")
    return np.min(np.stack(mesh), axis=0)


@dataclass(frozen=True)
class G1T1Report:
    """Global W^{1,q} size of G_1(u) and band-local H^1 energies of T_1(u)."""

    q: float
    g1_norm: float
    t1_band_energies: tuple[tuple[float, float], ...]


def g1_t1_split_energies(
    u: GridFunction, margins=(0.125, 0.25), q: float = 1.2
) -> G1T1Report:
    grid = u.grid
    g1 = GridFunction(grid, trunc_G(1.0, u.values))
    t1 = GridFunction(grid, trunc_T(1.0, u.values))
    g1_norm = sobolev_norm(g1, q)
    comps = _cell_gradients(t1)
    grad_sq = sum(c**2 for c in comps)
    center_d = _cell_center_distance(grid)
    energies = []
    for margin in margins:
        band = center_d >= margin - 1e-12
        energies.append(
            (float(margin), float(np.sum(grad_sq[band]) * grid.cell_volume))
        )
    return G1T1Report(q=q, g1_norm=g1_norm, t1_band_energies=tuple(energies))


def torsion_function(grid: Grid, tol: float = 1e-12) -> GridFunction:
    """Solve -Lap phi0 = 1 with zero boundary values; phi0 > 0 inside."""
    lap = build_laplacian(grid)
    ones = GridFunction(grid, np.ones(grid.interior_count))
    phi0 = solve_spd(lap, ones, tol)
    if float(phi0.values.min()) <= 0.0:
        raise RuntimeError("torsion function came out nonpositive at a node")
    return phi0


@dataclass(frozen=True)
class KatoReport:
    """Comparison of the positive-part mass against the weighted source gap.

    lhs  = sum (u1 - u2)^+ * vol
    rhs  = sum [u1 >= u2] * (f_cap (h_cap(u1+1/n) - h_cap(u2+1/n))
                             + (mu1_n - mu2_n)) * phi0 * vol

    The indicator multiplies the whole source difference, and h enters with
    the same level-n cap and 1/n shift the solutions were computed with, so
    for exact discrete solutions the inequality lhs <= rhs holds exactly.
    """

    lhs: float
    rhs: float
    residual: float
    tol: float
    passed: bool


def kato_residual(
    u1: SolveResult,
    u2: SolveResult,
    mu1_d: DiscretizedMeasure,
    mu2_d: DiscretizedMeasure,
    f_field: ScalarField | GridFunction,
    h: SingularNonlinearity,
    phi0: GridFunction,
    tol: float = 1e-10,
) -> KatoReport:
    if not (u1.converged and u2.converged):
        raise ValueError("Kato residual needs converged solutions")
    grid = u1.u.grid
    for other in (u2.u.grid, mu1_d.grid, mu2_d.grid, phi0.grid):
        require_same_grid(grid, other)
    if mu1_d.level != mu2_d.level:
        raise ValueError("discretized measures must share a regularization level")
    n = float(mu1_d.level)
    shift = 1.0 / n

    if isinstance(f_field, GridFunction):
        require_same_grid(grid, f_field.grid)
        f_vals = f_field.values
    else:
        f_vals = np.asarray(f_field(grid.node_coords), dtype=float)
    f_capped = np.minimum(f_vals, n)

    a = u1.u.values
    b = u2.u.values
    vol = grid.cell_volume
    lhs = float(np.sum(np.clip(a - b, 0.0, None)) * vol)

    indicator = a >= b
    hdiff = np.zeros_like(a)
    active = f_capped > 0
    if np.any(active):
        h1 = np.minimum(n, h(a[active] + shift))
        h2 = np.minimum(n, h(b[active] + shift))
        hdiff[active] = h1 - h2
    source_gap = f_capped * hdiff + (mu1_d.values.values - mu2_d.values.values)
    rhs = float(np.sum(indicator * source_gap * phi0.values) * vol)

    residual = rhs - lhs
    return KatoReport(
        lhs=lhs, rhs=rhs, residual=residual, tol=tol, passed=residual >= -tol
    )


def lambda1_estimate(
    grid: Grid, tol: float = 1e-8, max_iters: int = 500
) -> float:
    """Smallest Laplacian eigenvalue by inverse power iteration."""
    lap = build_laplacian(grid)
    x = np.ones(grid.interior_count)
    x /= np.linalg.norm(x)
    lam = None
    for _ in range(max_iters):
        y = solve_spd(lap, GridFunction(grid, x), 1e-12, x0=x).values
        y /= np.linalg.norm(y)
        lam_new = float(y @ (lap.matrix @ y))
        if lam is not None and abs(lam_new - lam) <= tol * abs(lam_new):
            return lam_new
        lam = lam_new
        x = y
    raise RuntimeError(f"inverse power iteration did not settle in {max_iters} steps")
