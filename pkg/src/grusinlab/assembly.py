"""Cell-centered grids and sparse divergence-form operators.

Operators -div(c grad .) are discretized with a two-point flux per
interior face: the conductance of a face is the arithmetic mean of the
two adjacent cell-centre coefficient values divided by h^2.  Cell counts
are even so the degeneracy hyperplane x1 = 0 falls on cell faces, never
on cell centres; every diagonal entry stays finite and the cross-origin
conductance inherits the correct resistance scaling in the spacing.

The arithmetic mean is deliberate: a harmonic face mean would hard-
decouple the two half-spaces for every degeneracy strength, destroying
the weak/strong dichotomy at d1 = 1/2 that the discretization must
reproduce.

Boundary condition tags:

    neumann_box       no flux through the box faces (row sums vanish,
                      constants lie in the kernel, evolution conserves
                      mass exactly)
    dirichlet_box     zero value at the box faces (half-spacing ghost)
    dirichlet_origin  neumann_box plus absorption at the faces on
                      x1 = 0: the cross-origin coupling is removed and
                      each adjacent cell is pinned to a zero face value
                      at distance h/2.  Quadratic form dominates the
                      neumann_box form and the kernel is dominated by it
                      entrywise.
    neumann_origin    neumann_box with the cross-origin coupling removed
                      and nothing added: two decoupled half-space
                      operators with no-flux at x1 = 0.
    periodic          all axes wrap around (used for Fourier-multiplier
                      comparisons).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .params import X1_BLOCK, X2_BLOCK, CoefficientField, GrusinParams

NEUMANN_BOX = "neumann_box"
DIRICHLET_BOX = "dirichlet_box"
DIRICHLET_ORIGIN = "dirichlet_origin"
NEUMANN_ORIGIN = "neumann_origin"
PERIODIC = "periodic"

BC_TAGS = (NEUMANN_BOX, DIRICHLET_BOX, DIRICHLET_ORIGIN, NEUMANN_ORIGIN, PERIODIC)


class Grid:
    """Tensor-product cell-centered grid on a box prod_i [-L_i, L_i].

    Each axis has an even cell count N_i and spacing h_i = 2 L_i / N_i;
    cell centres sit at (k + 1/2) h_i - L_i, so the planes x_i = 0
    coincide with cell faces.
    """

    def __init__(self, half_widths: Sequence[float], cells: Sequence[int]):
        half_widths = [float(L) for L in np.atleast_1d(half_widths)]
        cells = [int(N) for N in np.atleast_1d(cells)]
        if len(half_widths) != len(cells):
            raise ValueError("half_widths and cells must have equal length")
        for L, N in zip(half_widths, cells):
            if L <= 0.0:
                raise ValueError(f"half width must be positive, got {L}")
            if N < 2 or N % 2:
                raise ValueError(f"cell count must be even and >= 2, got {N}")
        self.half_widths = tuple(half_widths)
        self.shape = tuple(cells)
        self.dim = len(cells)
        self.spacing = tuple(2.0 * L / N for L, N in zip(half_widths, cells))
        self.size = int(np.prod(self.shape))
        self.cell_measure = float(np.prod(self.spacing))
        self._axes = [
            (np.arange(N) + 0.5) * h - L
            for N, h, L in zip(self.shape, self.spacing, self.half_widths)
        ]

    @classmethod
    def cube(cls, half_width: float, cells: int, dim: int) -> "Grid":
        return cls([half_width] * dim, [cells] * dim)

    def axis_centers(self, axis: int) -> np.ndarray:
        return self._axes[axis]

    def meshgrid(self) -> list[np.ndarray]:
        return np.meshgrid(*self._axes, indexing="ij")

    def cell_center(self, cell: int) -> tuple[float, ...]:
        multi = np.unravel_index(cell, self.shape)
        return tuple(self._axes[ax][i] for ax, i in enumerate(multi))

    def cell_at(self, point: Sequence[float]) -> int:
        """Index of the cell whose centre is nearest to `point`."""
        point = np.atleast_1d(np.asarray(point, dtype=float))
        if point.size != self.dim:
            raise ValueError("point dimension does not match grid")
        multi = []
        for ax, x in enumerate(point):
            i = int(np.clip(np.round((x + self.half_widths[ax]) / self.spacing[ax] - 0.5),
                            0, self.shape[ax] - 1))
            multi.append(i)
        return int(np.ravel_multi_index(tuple(multi), self.shape))

    def coordinate_arrays(self) -> np.ndarray:
        """All cell centres as an array of shape (size, dim)."""
        mesh = self.meshgrid()
        return np.stack([m.ravel() for m in mesh], axis=1)

    def x1_norms(self, n: int | None = None) -> np.ndarray:
        """|x1| per cell, where x1 is the first `n` coordinates.

        With n = None the x1 block is inferred as all axes for 1D grids
        and must be supplied otherwise via `block_norms`.
        """
        if n is None:
            n = self.dim
        mesh = self.meshgrid()
        sq = sum(mesh[i] ** 2 for i in range(n))
        return np.sqrt(sq).ravel()

    def boundary_mask(self, layers: int = 1) -> np.ndarray:
        """Boolean mask of cells within `layers` cells of the box boundary."""
        mask = np.zeros(self.shape, dtype=bool)
        for ax in range(self.dim):
            sl_lo = [slice(None)] * self.dim
            sl_hi = [slice(None)] * self.dim
            sl_lo[ax] = slice(0, layers)
            sl_hi[ax] = slice(self.shape[ax] - layers, self.shape[ax])
            mask[tuple(sl_lo)] = True
            mask[tuple(sl_hi)] = True
        return mask.ravel()


@dataclass
class DivergenceOperator:
    """Sparse symmetric PSD realization of -div(c grad .) on a grid."""

    grid: Grid
    matrix: sp.csr_matrix
    bc: str
    coeff: CoefficientField | None = None

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def apply(self, phi: np.ndarray) -> np.ndarray:
        return self.matrix @ phi

    def symmetry_defect(self) -> float:
        d = self.matrix - self.matrix.T
        return float(abs(d).max()) if d.nnz else 0.0

    def row_sum_defect(self) -> float:
        return float(np.max(np.abs(self.matrix @ np.ones(self.size))))


def _block_of_axis(axis: int, n: int) -> str:
    return X1_BLOCK if axis < n else X2_BLOCK


def assemble(
    grid: Grid,
    coeff: CoefficientField,
    bc: str = NEUMANN_BOX,
    coefficient_override=None,
) -> DivergenceOperator:
    """Assemble the divergence-form operator for a coefficient field.

    `coefficient_override`, if given, maps (block, |x1| array) to
    coefficient values and replaces the field's own evaluation; it is
    used for clamped/shifted approximants and frozen-coefficient
    comparisons.
    """
    if bc not in BC_TAGS:
        raise ValueError(f"unknown boundary condition {bc!r}")
    p = coeff.params
    if grid.dim != p.dim:
        raise ValueError(f"grid dimension {grid.dim} != n + m = {p.dim}")
    if bc in (DIRICHLET_ORIGIN, NEUMANN_ORIGIN) and p.n != 1:
        raise ValueError(f"{bc} is only supported for n = 1")

    evaluate = coefficient_override if coefficient_override is not None else coeff
    r = grid.x1_norms(p.n)
    cell_coeff = {X1_BLOCK: np.asarray(evaluate(X1_BLOCK, r), dtype=float)}
    if p.m:
        cell_coeff[X2_BLOCK] = np.asarray(evaluate(X2_BLOCK, r), dtype=float)

    shape = grid.shape
    idx = np.arange(grid.size).reshape(shape)
    rows, cols, vals = [], [], []
    diag = np.zeros(grid.size)

    def add_face(u, v, w):
        np.add.at(diag, u, w)
        np.add.at(diag, v, w)
        rows.append(u)
        cols.append(v)
        vals.append(-w)
        rows.append(v)
        cols.append(u)
        vals.append(-w)

    for axis in range(grid.dim):
        block = _block_of_axis(axis, p.n)
        c = cell_coeff[block]
        h2 = grid.spacing[axis] ** 2
        n_ax = shape[axis]

        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[axis] = slice(0, n_ax - 1)
        hi[axis] = slice(1, n_ax)
        u = idx[tuple(lo)].ravel()
        v = idx[tuple(hi)].ravel()
        w = 0.5 * (c[u] + c[v]) / h2

        if axis == 0 and bc in (DIRICHLET_ORIGIN, NEUMANN_ORIGIN):
            # faces on x1 = 0 sit between axis indices N/2 - 1 and N/2
            face_axis_index = np.unravel_index(u, shape)[axis]
            on_origin = face_axis_index == n_ax // 2 - 1
            keep = ~on_origin
            if bc == DIRICHLET_ORIGIN:
                # zero face value at distance h/2 from each adjacent centre
                diag_add = np.zeros(grid.size)
                np.add.at(diag_add, u[on_origin], 2.0 * w[on_origin])
                np.add.at(diag_add, v[on_origin], 2.0 * w[on_origin])
                diag += diag_add
            u, v, w = u[keep], v[keep], w[keep]
        add_face(u, v, w)

        if bc == PERIODIC:
            lo[axis] = slice(n_ax - 1, n_ax)
            hi[axis] = slice(0, 1)
            u = idx[tuple(lo)].ravel()
            v = idx[tuple(hi)].ravel()
            w = 0.5 * (c[u] + c[v]) / h2
            add_face(u, v, w)
        elif bc == DIRICHLET_BOX:
            for side in (0, n_ax - 1):
                sl = [slice(None)] * grid.dim
                sl[axis] = slice(side, side + 1)
                u = idx[tuple(sl)].ravel()
                diag_add = np.zeros(grid.size)
                np.add.at(diag_add, u, 2.0 * c[u] / h2)
                diag += diag_add

    rows.append(np.arange(grid.size))
    cols.append(np.arange(grid.size))
    vals.append(diag)
    matrix = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.size, grid.size),
    )
    matrix = 0.5 * (matrix + matrix.T)  # exact symmetry
    return DivergenceOperator(grid=grid, matrix=matrix, bc=bc, coeff=coeff)


def assemble_1d_example(grid: Grid, delta: float, bc: str = NEUMANN_BOX) -> DivergenceOperator:
    """Operator of the one-dimensional example c(x) = (x^2/(1+x^2))^delta."""
    if grid.dim != 1:
        raise ValueError("the one-dimensional example requires a 1D grid")
    if not 0.0 <= delta < 1.0:
        raise ValueError(f"delta must lie in [0, 1), got {delta}")
    from .params import example_1d_coefficient

    return assemble(grid, example_1d_coefficient(delta), bc=bc)


def assemble_approximant(
    grid: Grid,
    coeff: CoefficientField,
    n_cap: float,
    eps: float,
    bc: str = NEUMANN_BOX,
) -> DivergenceOperator:
    """Strongly elliptic approximant: coefficients min(c, n_cap) + eps.

    Every conductance is then >= eps / h^2 and the quadratic form
    dominates the unregularized one.
    """
    if not (n_cap > eps > 0.0):
        raise ValueError("approximant requires n_cap > eps > 0")

    def clamped(block, r):
        return np.minimum(np.asarray(coeff(block, r), dtype=float), n_cap) + eps

    op = assemble(grid, coeff, bc=bc, coefficient_override=clamped)
    return op


def quadratic_form(op: DivergenceOperator, phi: np.ndarray) -> float:
    """Energy h(phi) = phi^T H phi * cell measure (a discrete integral)."""
    phi = np.asarray(phi, dtype=float)
    if phi.size != op.size:
        raise ValueError("vector length does not match operator size")
    return float(phi @ (op.matrix @ phi)) * op.grid.cell_measure


def smallest_eigenvalue(op: DivergenceOperator) -> float:
    """Smallest eigenvalue, for PSD verification (dense for small sizes)."""
    if op.size <= 3000:
        return float(np.linalg.eigvalsh(op.matrix.toarray())[0])
    from scipy.sparse.linalg import eigsh

    val = eigsh(op.matrix, k=1, which="SA", return_eigenvectors=False, tol=1e-8)
    return float(val[0])


def power_lambda_max(op: DivergenceOperator, tol: float = 1e-3, max_iter: int = 500) -> float:
    """Largest-eigenvalue estimate by power iteration, inflated 5%.

    The inflation guarantees spectral inclusions used by time steppers
    and polynomial propagators even with the loose tolerance.
    """
    rng = np.random.default_rng(1234)
    v = rng.standard_normal(op.size)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = op.matrix @ v
        lam_new = float(v @ w)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        if abs(lam_new - lam) <= tol * abs(lam_new):
            lam = lam_new
            break
        lam = lam_new
    return 1.05 * lam


def cutoff_function(n_cut: int, x: np.ndarray) -> np.ndarray:
    """One-sided logarithmic cutoff: 0 below -1, 1 above -1/n_cut.

    On (-1, -1/n_cut) the value is -log|x| / log(n_cut).
    """
    if n_cut < 2:
        raise ValueError("cutoff index must be >= 2")
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    out[x <= -1.0] = 0.0
    ramp = (x > -1.0) & (x < -1.0 / n_cut)
    out[ramp] = -np.log(np.abs(x[ramp])) / np.log(n_cut)
    return out


def even_cutoff(n_cut: int, x: np.ndarray) -> np.ndarray:
    """Even cutoff: 1 on [-1/n_cut, 1/n_cut], log ramps down to 0 at |x| = 1."""
    return np.minimum(cutoff_function(n_cut, x), cutoff_function(n_cut, -x))


def cutoff_energy_exact(delta: float, n_cut: int, sides: int = 2) -> float:
    """Closed-form energy of the log cutoff against the |x|^(2 delta) weight.

    One side contributes (n^(1-2 delta) - 1) / ((1 - 2 delta) log(n)^2)
    for delta != 1/2 and 1/log(n) for delta = 1/2.
    """
    log_n = np.log(n_cut)
    if abs(delta - 0.5) < 1e-14:
        one_side = 1.0 / log_n
    else:
        one_side = (n_cut ** (1.0 - 2.0 * delta) - 1.0) / ((1.0 - 2.0 * delta) * log_n**2)
    return sides * one_side


def cutoff_energy(delta: float, n_cut: int, grid: Grid) -> float:
    """Quadrature energy h(xi_n) of the even cutoff for c(x) = |x|^(2 delta).

    The grid must resolve the inner ramp edge: spacing <= 1/(4 n_cut).
    The trend in n_cut separates weak from strong degeneracy: the energy
    grows without bound for delta < 1/2 and decays to zero for
    delta >= 1/2.
    """
    if grid.dim != 1:
        raise ValueError("cutoff energies are one-dimensional")
    if grid.half_widths[0] <= 1.0:
        raise ValueError("box must contain the support [-1, 1] of the cutoff")
    h = grid.spacing[0]
    if h > 1.0 / (4.0 * n_cut):
        raise ValueError(
            f"grid spacing {h:.3e} does not resolve the cutoff; "
            f"need spacing <= {1.0 / (4.0 * n_cut):.3e} "
            f"(>= {int(np.ceil(8.0 * grid.half_widths[0] * n_cut))} cells)"
        )
    field = CoefficientField(
        GrusinParams(n=1, m=0, d1=delta, d1p=delta), representative="pure_power"
    )
    op = assemble(grid, field, bc=NEUMANN_BOX)
    xi = even_cutoff(n_cut, grid.axis_centers(0))
    return quadratic_form(op, xi)
