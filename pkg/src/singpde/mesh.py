"""Uniform Cartesian grids on the unit box and the discrete Dirichlet Laplacian.

Unknowns live on the interior nodes of a uniform grid over [0, 1]^dim with
implicit zero boundary values.  The negative Laplacian is the standard
(2*dim + 1)-point central-difference stencil, assembled as a sparse symmetric
positive-definite matrix; linear systems are solved with Jacobi-preconditioned
conjugate gradients.  Everything here is value-semantic: build and solve are
pure functions, safe to call concurrently on distinct inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Grid",
    "GridFunction",
    "DiscreteOperator",
    "LinearSolveError",
    "build_grid",
    "build_laplacian",
    "solve_spd",
    "min_on_compact",
    "sample_field",
    "l1_norm",
    "max_norm",
    "require_same_grid",
]

# Slack for margin comparisons so nodes sitting exactly on a band edge are
# kept even when the coordinate is not exactly representable (e.g. h = 1/3).
_MARGIN_EPS = 1e-12


class LinearSolveError(RuntimeError):
    """Conjugate-gradient failure.  Carries the final relative residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform grid on the unit box with zero Dirichlet boundary.

    Only interior nodes carry unknowns.  ``boundary_distance`` holds the exact
    distance of each interior node to the box boundary (minimum over the face
    distances), which is what defines the compact bands {d(x) >= margin}.
    """

    dim: int
    cells_per_side: int
    spacing: float
    boundary_margin: float
    interior_count: int
    axis_coords: np.ndarray  # (cells_per_side - 1,)
    node_coords: np.ndarray  # (interior_count, dim), C-ordered lattice
    boundary_distance: np.ndarray  # (interior_count,)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.cells_per_side - 1,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    def matches(self, other: "Grid") -> bool:
        return self.dim == other.dim and self.cells_per_side == other.cells_per_side


def require_same_grid(a: Grid, b: Grid) -> None:
    if not a.matches(b):
        raise ValueError(
            f"grid mismatch: {a.dim}D/{a.cells_per_side} cells vs "
            f"{b.dim}D/{b.cells_per_side} cells"
        )


@dataclass(eq=False)
class GridFunction:
    """Nodal values of a scalar field on the interior nodes of a grid.

    Boundary values are implicitly zero.  Construction rejects non-finite
    entries, so any operation returning a GridFunction yields finite data.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape == self.grid.shape:
            values = values.ravel()
        if values.shape != (self.grid.interior_count,):
            raise ValueError(
                f"expected {self.grid.interior_count} nodal values, "
                f"got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function contains non-finite values")
        self.values = values

    def reshape(self) -> np.ndarray:
        """Values as a (m-1,)*dim lattice array (view when possible)."""
        return self.values.reshape(self.grid.shape)

    def copy(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.copy())


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """Sparse SPD matrix of the (2*dim+1)-point Dirichlet Laplacian stencil."""

    grid: Grid
    matrix: sp.csr_matrix


def build_grid(dim: int, cells_per_side: int, boundary_margin: float = 0.0) -> Grid:
    """Build a uniform grid on [0, 1]^dim.

    ``cells_per_side`` is the number of cells along each axis; the interior
    holds (cells_per_side - 1)^dim nodes.  ``boundary_margin`` is retained on
    the grid as the default band width for near-boundary diagnostics.
    """
    if dim not in (1, 2, 3):
        raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
    if cells_per_side < 2:
        raise ValueError(f"cells_per_side must be at least 2, got {cells_per_side}")
    if not 0.0 <= boundary_margin < 0.5:
        raise ValueError(
            f"boundary_margin must lie in [0, 0.5), got {boundary_margin}"
        )
    spacing = 1.0 / cells_per_side
    axis = spacing * np.arange(1, cells_per_side)
    mesh = np.meshgrid(*(axis,) * dim, indexing="ij")
    node_coords = np.stack([c.ravel() for c in mesh], axis=1)
    boundary_distance = np.min(
        np.minimum(node_coords, 1.0 - node_coords), axis=1
    )
    return Grid(
        dim=dim,
        cells_per_side=cells_per_side,
        spacing=spacing,
        boundary_margin=boundary_margin,
        interior_count=(cells_per_side - 1) ** dim,
        axis_coords=axis,
        node_coords=node_coords,
        boundary_distance=boundary_distance,
    )


def build_laplacian(grid: Grid) -> DiscreteOperator:
    """Assemble the negative Laplacian with zero Dirichlet boundary.

    The 1D stencil (-1, 2, -1)/h^2 is extended to higher dimensions as a
    Kronecker sum, matching the C-ordering of GridFunction values.
    """
    m = grid.cells_per_side - 1
    h2 = grid.spacing**2
    main = np.full(m, 2.0 / h2)
    off = np.full(m - 1, -1.0 / h2)
    t = sp.diags([off, main, off], [-1, 0, 1], format="csr")
    eye = sp.identity(m, format="csr")
    if grid.dim == 1:
        a = t
    elif grid.dim == 2:
        a = sp.kron(t, eye) + sp.kron(eye, t)
    else:
        a = (
            sp.kron(sp.kron(t, eye), eye)
            + sp.kron(sp.kron(eye, t), eye)
            + sp.kron(sp.kron(eye, eye), t)
        )
    return DiscreteOperator(grid=grid, matrix=sp.csr_matrix(a))


def solve_spd(
    op: DiscreteOperator,
    rhs: GridFunction,
    tol: float,
    x0: np.ndarray | GridFunction | None = None,
) -> GridFunction:
    """Solve op @ x = rhs by Jacobi-preconditioned conjugate gradients.

    The returned x satisfies ||op @ x - rhs||_2 <= tol * ||rhs||_2; a zero
    right-hand side returns the zero function.  Convergence is verified
    against the true residual, not only the CG recurrence.  Failure to
    converge within 20 * interior_count iterations raises LinearSolveError.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    require_same_grid(op.grid, rhs.grid)
    a = op.matrix
    b = rhs.values
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return GridFunction(rhs.grid, np.zeros_like(b))
    target = tol * bnorm

    if x0 is None:
        x = np.zeros_like(b)
    else:
        x = np.array(x0.values if isinstance(x0, GridFunction) else x0, dtype=float)
    inv_diag = 1.0 / a.diagonal()
    cap = 20 * op.grid.interior_count
    iters = 0

    while True:
        r = b - a @ x  # true residual; restart point
        if float(np.linalg.norm(r)) <= target:
            return GridFunction(rhs.grid, x)
        if iters >= cap:
            raise LinearSolveError(
                f"conjugate gradients did not converge within {cap} iterations",
                residual=float(np.linalg.norm(r)) / bnorm,
            )
        z = inv_diag * r
        p = z.copy()
        rz = float(r @ z)
        while iters < cap:
            ap = a @ p
            pap = float(p @ ap)
            if pap <= 0.0:
                raise LinearSolveError(
                    "conjugate gradients broke down (matrix not SPD?)",
                    residual=float(np.linalg.norm(b - a @ x)) / bnorm,
                )
            alpha = rz / pap
            x += alpha * p
            r -= alpha * ap
            iters += 1
            if float(np.linalg.norm(r)) <= 0.9 * target:
                break  # verify true residual in the outer loop
            z = inv_diag * r
            rz_new = float(r @ z)
            p = z + (rz_new / rz) * p
            rz = rz_new


def min_on_compact(u: GridFunction, margin: float) -> float:
    """Minimum of u over the compact band of nodes with d(x) >= margin."""
    if not 0.0 <= margin < 0.5:
        raise ValueError(f"margin must lie in [0, 0.5), got {margin}")
    mask = u.grid.boundary_distance >= margin - _MARGIN_EPS
    if not mask.any():
        raise ValueError(f"no interior nodes at distance >= {margin} from the boundary")
    return float(u.values[mask].min())


def sample_field(grid: Grid, fn) -> GridFunction:
    """Sample a callable (points array (N, dim) -> (N,)) at the interior nodes."""
    values = np.asarray(fn(grid.node_coords), dtype=float)
    return GridFunction(grid, values)


def l1_norm(u: GridFunction) -> float:
    """Discrete L1 norm: sum of |values| times the cell volume."""
    return float(np.sum(np.abs(u.values)) * u.grid.cell_volume)


def max_norm(u: GridFunction) -> float:
    return float(np.max(np.abs(u.values))) if u.values.size else 0.0
