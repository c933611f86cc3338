"""Inequality toolkit: Hardy constants, operator monotonicity, Nash chains
and subelliptic pencil constants.

Fourier-multiplier comparisons are carried out on periodic grids, where
the discrete Fourier transform diagonalizes the multiplier exactly and
the operator side uses the periodic wrap of the same stencil.  By
default the per-axis symbol fed into a multiplier is the discrete one,
(2 - 2 cos(h p)) / h^2, which removes the O(h^2 p^4) discretization
artifact from measured constants; the continuum symbol p^2 is available
for convergence studies.

The subelliptic constant of a pair (H, F) is the smallest generalized
eigenvalue of the pencil (H, F(multiplier)) over non-constant modes:
the largest a with h(phi) >= a f(phi) on the grid.  Pre-scaling F by
this constant makes the Nash inequality

    ||phi||_2^2 <= r^(-2) h(phi) + (2 pi)^(-d) V_F(r) ||phi||_1^2

an exact lattice statement, which `nash_check` verifies with
non-negative slack.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (
    DIRICHLET_BOX,
    DIRICHLET_ORIGIN,
    NEUMANN_BOX,
    NEUMANN_ORIGIN,
    PERIODIC,
    DivergenceOperator,
    Grid,
    assemble,
)
from .params import (
    CoefficientField,
    GrusinParams,
    derive_exponents,
)

EIG_TOL = 1e-10


# ---------------------------------------------------------------------------
# Fourier multipliers


@dataclass(frozen=True)
class MultiplierSpec:
    """A non-negative even symbol F built from block Laplacian symbols.

    kinds:
      elliptic   F = mu (lam1 + lam2), the strongly elliptic reference
      x1_block   the x1-direction lower-bound multiplier:
                 lam1^(1-d1') (1+lam1)^(-(d1-d1')) when d1 >= d1', else
                 lam1^(1-d1) + lam1^(1-d1')
      x2_block   lam2^(alpha') (1+lam2)^(alpha-alpha')
      composite  x1_block + x2_block (x1_block alone when m = 0)

    lam1/lam2 are the Laplacian symbols of the two coordinate blocks;
    with discrete_symbol the per-axis value is (2-2 cos(h p))/h^2.
    `scale` multiplies the symbol (used to pre-scale by a measured
    pencil constant).
    """

    params: GrusinParams
    kind: str = "composite"
    mu: float = 1.0
    scale: float = 1.0
    discrete_symbol: bool = True

    def __post_init__(self):
        if self.kind not in ("elliptic", "x1_block", "x2_block", "composite"):
            raise ValueError(f"unknown multiplier kind {self.kind!r}")
        if self.kind in ("x2_block",) and self.params.m == 0:
            raise ValueError("x2_block multiplier requires m >= 1")

    def scaled(self, factor: float) -> "MultiplierSpec":
        return MultiplierSpec(
            params=self.params,
            kind=self.kind,
            mu=self.mu,
            scale=self.scale * factor,
            discrete_symbol=self.discrete_symbol,
        )

    def _f1(self, lam1: np.ndarray) -> np.ndarray:
        p = self.params
        if p.d1 >= p.d1p:
            return lam1 ** (1.0 - p.d1p) * (1.0 + lam1) ** (-(p.d1 - p.d1p))
        return lam1 ** (1.0 - p.d1) + lam1 ** (1.0 - p.d1p)

    def _f2(self, lam2: np.ndarray) -> np.ndarray:
        e = derive_exponents(self.params)
        return lam2**e.alphap * (1.0 + lam2) ** (e.alpha - e.alphap)

    def evaluate(self, lam1: np.ndarray, lam2: np.ndarray) -> np.ndarray:
        if self.kind == "elliptic":
            out = self.mu * (lam1 + lam2)
        elif self.kind == "x1_block":
            out = self._f1(lam1)
        elif self.kind == "x2_block":
            out = self._f2(lam2)
        else:
            out = self._f1(lam1)
            if self.params.m:
                out = out + self._f2(lam2)
        return self.scale * out

    def on_lattice(self, grid: Grid) -> np.ndarray:
        """Symbol values on the DFT frequency lattice of a periodic grid."""
        lam1, lam2 = _block_symbols(grid, self.params, self.discrete_symbol)
        return self.evaluate(lam1, lam2)


def _axis_frequencies(grid: Grid, axis: int) -> np.ndarray:
    """Angular frequencies of the DFT along one axis (spacing pi / L)."""
    return 2.0 * np.pi * np.fft.fftfreq(grid.shape[axis], d=grid.spacing[axis])


def _axis_symbol(grid: Grid, axis: int, discrete: bool) -> np.ndarray:
    p = _axis_frequencies(grid, axis)
    if discrete:
        h = grid.spacing[axis]
        return (2.0 - 2.0 * np.cos(h * p)) / h**2
    return p**2


def _block_symbols(grid: Grid, params: GrusinParams, discrete: bool):
    """Laplacian symbols of the x1 and x2 blocks on the frequency lattice."""
    per_axis = [_axis_symbol(grid, ax, discrete) for ax in range(grid.dim)]
    mesh = np.meshgrid(*per_axis, indexing="ij")
    lam1 = sum(mesh[:params.n]) if params.n else np.zeros(grid.shape)
    lam2 = sum(mesh[params.n:]) if params.m else np.zeros(grid.shape)
    return np.asarray(lam1, dtype=float), np.asarray(lam2, dtype=float)


def frequency_cell_measure(grid: Grid) -> float:
    return float(np.prod([np.pi / L for L in grid.half_widths]))


def vf_volume(spec: MultiplierSpec, grid: Grid, r: float, allow_full_box: bool = False) -> float:
    """Measure of the sublevel set {p : F(p) < r^2} by lattice counting.

    Counts DFT lattice points of the grid and multiplies by the
    frequency cell measure prod(pi / L).  Unless `allow_full_box`, a
    sublevel set touching the Nyquist boundary is rejected because the
    count would then truncate the continuum volume.
    """
    if r <= 0.0:
        raise ValueError("r must be positive")
    f_vals = spec.on_lattice(grid)
    if not np.any(f_vals > 0.0):
        raise ValueError("multiplier is identically zero on the lattice")
    inside = f_vals < r * r
    if not allow_full_box:
        boundary = _nyquist_boundary_mask(grid)
        if np.any(inside & boundary):
            raise ValueError(
                "sublevel set reaches the frequency box boundary; "
                "refine the grid or reduce r"
            )
    return float(np.count_nonzero(inside)) * frequency_cell_measure(grid)


def _nyquist_boundary_mask(grid: Grid) -> np.ndarray:
    mask = np.zeros(grid.shape, dtype=bool)
    for ax in range(grid.dim):
        freqs = _axis_frequencies(grid, ax)
        extreme = np.abs(np.abs(freqs) - np.abs(freqs).max()) < 1e-12
        shape = [1] * grid.dim
        shape[ax] = grid.shape[ax]
        mask |= extreme.reshape(shape)
    return mask


# ---------------------------------------------------------------------------
# matrix inequalities


def random_psd_pair(order: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Ordered pair A >= B >= 0 built from random Gram matrices."""
    if order > 50:
        raise ValueError("random pairs are kept at small order (<= 50)")
    gb = rng.standard_normal((order, order))
    ga = rng.standard_normal((order, order))
    b = gb @ gb.T / order
    a = b + ga @ ga.T / order
    return a, b


def _matrix_function(mat: np.ndarray, func) -> np.ndarray:
    w, v = np.linalg.eigh(mat)
    w = np.maximum(w, 0.0)
    return (v * func(w)) @ v.T


def operator_monotone_check(a: np.ndarray, b: np.ndarray, gamma: float) -> float:
    """Min eigenvalue of A(I+A)^(-gamma) - B(I+B)^(-gamma); >= 0 up to
    roundoff whenever A >= B >= 0 and gamma in [0, 1]."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")

    def f(w):
        return w * (1.0 + w) ** (-gamma)

    diff = _matrix_function(a, f) - _matrix_function(b, f)
    return float(np.linalg.eigvalsh(diff)[0])


def sqrt_subadditivity_check(a: np.ndarray, b: np.ndarray, k: int = 1) -> float:
    """Min eigenvalue of (A+B)^(1/2^k) - 2^(-1+2^(-k)) (A^(1/2^k) + B^(1/2^k))."""
    if k < 1:
        raise ValueError("k must be >= 1")
    power = 0.5**k
    constant = 2.0 ** (-1.0 + 2.0**-k)

    def f(w):
        return w**power

    diff = _matrix_function(a + b, f) - constant * (_matrix_function(a, f) + _matrix_function(b, f))
    return float(np.linalg.eigvalsh(diff)[0])


# ---------------------------------------------------------------------------
# Hardy constants


def hardy_constant(
    grid: Grid,
    gamma: float = 1.0,
    space: str = "full_space",
) -> float:
    """Best constant a in L^gamma >= a |x|^(-2 gamma) on the grid.

    space = "full_space": the Laplacian with a zero box boundary on the
    n-dimensional grid; gamma must lie in [0, min(1, n/2)) or equal 1
    with n >= 3 (the classical case with optimal constant (n-2)^2/4).

    space = "half_line_dirichlet": n = 1 with a zero condition at the
    origin and gamma = 1; the continuum constant is 1/4.  The outer box
    end is left reflecting so truncation does not inflate the constant.
    """
    n = grid.dim
    weight_coeff = GrusinParams(n=n, m=0)
    field = CoefficientField(weight_coeff, representative="pure_power")
    if space == "half_line_dirichlet":
        if n != 1:
            raise ValueError("the Dirichlet-at-origin variant is one-dimensional")
        if gamma != 1.0:
            raise ValueError("the Dirichlet-at-origin variant is stated for gamma = 1")
        lap = assemble(grid, field, bc=DIRICHLET_ORIGIN)
    elif space == "full_space":
        fractional_ok = 0.0 <= gamma < min(1.0, n / 2.0)
        classical_ok = gamma == 1.0 and n >= 3
        if not (fractional_ok or classical_ok):
            raise ValueError(
                f"gamma = {gamma} outside the valid range for n = {n} "
                "(need gamma in [0, min(1, n/2)) or gamma = 1 with n >= 3)"
            )
        if gamma == 0.0:
            return 1.0
        lap = assemble(grid, field, bc=DIRICHLET_BOX)
    else:
        raise ValueError(f"unknown space {space!r}")

    radii = grid.x1_norms(n)
    weight = radii ** (-2.0 * gamma)

    if gamma == 1.0:
        return _pencil_smallest_sparse(lap.matrix, weight)
    # fractional power: dense spectral calculus on small grids
    if grid.size > 4096:
        raise ValueError("fractional powers use dense eigendecomposition; grid too large")
    w, v = np.linalg.eigh(lap.matrix.toarray())
    frac = (v * np.maximum(w, 0.0) ** gamma) @ v.T
    sym = frac / np.sqrt(weight)[:, None] / np.sqrt(weight)[None, :]
    return float(np.linalg.eigvalsh(0.5 * (sym + sym.T))[0])


def hardy_constant_graded(
    n_nodes: int = 4000,
    x_min: float = 1e-10,
    x_max: float = 1.0,
) -> float:
    """Dirichlet-at-origin Hardy constant on a log-graded half-line mesh.

    The Hardy infimum is approached only logarithmically in the number
    of resolved decades, so a uniform mesh with a few thousand cells
    stalls around 0.29; a geometric mesh reaches the continuum value
    1/4 within a few percent at the same node budget.  Finite-volume
    three-point stencil, zero value at the origin, reflecting outer end
    (so box truncation does not inflate the constant).
    """
    x = np.geomspace(x_min, x_max, n_nodes)
    gaps = np.diff(x)
    mids = 0.5 * (x[1:] + x[:-1])
    hbar = np.concatenate([mids, [x_max]]) - np.concatenate([[0.0], mids])
    rows, cols, vals = [], [], []
    diag = np.zeros(n_nodes)
    for i in range(n_nodes - 1):
        w = 1.0 / gaps[i]
        diag[i] += w
        diag[i + 1] += w
        rows += [i, i + 1]
        cols += [i + 1, i]
        vals += [-w, -w]
    diag[0] += 1.0 / x[0]  # zero value at the origin
    a_mat = sp.csr_matrix(
        (vals + list(diag), (rows + list(range(n_nodes)), cols + list(range(n_nodes)))),
        shape=(n_nodes, n_nodes),
    )
    weight = hbar / x**2
    return _pencil_smallest_sparse(a_mat, weight)


def hardy_constant_radial_oracle(
    n: int = 3,
    n_nodes: int = 4000,
    r_min: float = 1e-10,
) -> float:
    """Radial-coordinate oracle for the n-dimensional Hardy constant.

    The minimizers of the full-space problem are radial, so the
    infimum can be computed on a one-dimensional geometric mesh with
    the radial measure r^(n-1) dr.  Used as a continuum cross-check for
    the (log-slow) full-dimensional lattice computation.
    """
    r = np.geomspace(r_min, 1.0, n_nodes + 1)[:-1]
    gaps = np.diff(r)
    mids = 0.5 * (r[1:] + r[:-1])
    hbar = np.concatenate([mids, [1.0]]) - np.concatenate([[0.0], mids])
    rows, cols, vals = [], [], []
    diag = np.zeros(n_nodes)
    for i in range(n_nodes - 1):
        w = mids[i] ** (n - 1) / gaps[i]
        diag[i] += w
        diag[i + 1] += w
        rows += [i, i + 1]
        cols += [i + 1, i]
        vals += [-w, -w]
    diag[-1] += 1.0 ** (n - 1) / (1.0 - r[-1])  # zero value at the outer radius
    a_mat = sp.csr_matrix(
        (vals + list(diag), (rows + list(range(n_nodes)), cols + list(range(n_nodes)))),
        shape=(n_nodes, n_nodes),
    )
    weight = hbar * r ** (n - 1) / r**2
    return _pencil_smallest_sparse(a_mat, weight)


def _pencil_smallest_sparse(matrix: sp.csr_matrix, weight: np.ndarray) -> float:
    """Smallest generalized eigenvalue of (A, diag(weight)), A sparse PD."""
    size = matrix.shape[0]
    w_mat = sp.diags(weight)
    if size <= 4096:
        sym = matrix.toarray() / np.sqrt(weight)[:, None] / np.sqrt(weight)[None, :]
        return float(np.linalg.eigvalsh(0.5 * (sym + sym.T))[0])
    try:
        import pyamg

        ml = pyamg.smoothed_aggregation_solver(matrix.tocsr())
        prec = ml.aspreconditioner()
        rng = np.random.default_rng(7)
        x0 = rng.standard_normal((size, 3))
        vals, _ = spla.lobpcg(
            matrix, x0, B=w_mat, M=prec, largest=False, tol=1e-7, maxiter=400
        )
        return float(np.min(vals))
    except ImportError:
        vals = spla.eigsh(
            matrix, k=1, M=w_mat, sigma=0.0, which="LM", return_eigenvectors=False
        )
        return float(vals[0])


# ---------------------------------------------------------------------------
# subelliptic pencils and the Nash chain


def _multiplier_matrix(grid: Grid, f_vals: np.ndarray) -> np.ndarray:
    """Dense matrix of the multiplier diag(F) in the cell basis."""
    size = grid.size
    out = np.empty((size, size))
    eye = np.zeros(grid.shape)
    flat = eye.reshape(-1)
    for j in range(size):
        flat[j] = 1.0
        col = np.fft.ifftn(f_vals * np.fft.fftn(eye)).real
        out[:, j] = col.reshape(-1)
        flat[j] = 0.0
    return 0.5 * (out + out.T)


def subelliptic_constant(
    op: DivergenceOperator,
    spec: MultiplierSpec,
    n_modes: int = 2,
) -> float:
    """Largest a with h(phi) >= a f(phi) over non-constant grid modes.

    The operator must be assembled with periodic wrap on the same grid
    the multiplier lattice refers to.  Computed as the smallest
    generalized eigenvalue of the pencil (H, M_F) after deflating the
    shared constant-vector kernel.
    """
    if op.bc != PERIODIC:
        raise ValueError("subelliptic pencils require a periodic operator")
    grid = op.grid
    f_vals = spec.on_lattice(grid)
    if not np.any(f_vals > 0.0):
        raise ValueError("multiplier is identically zero")
    size = grid.size
    a_mat = op.matrix.toarray()
    b_mat = _multiplier_matrix(grid, f_vals)
    shift = float(np.trace(b_mat) / size)
    p0 = np.full((size, size), 1.0 / size)
    from scipy.linalg import eigh

    vals, vecs = eigh(
        a_mat + shift * p0, b_mat + shift * p0, subset_by_index=[0, min(n_modes, size - 1)]
    )
    ones = np.ones(size) / np.sqrt(size)
    for lam, vec in zip(vals, vecs.T):
        if abs(ones @ vec) / np.linalg.norm(vec) > 0.99:
            continue  # the deflated constant mode
        return float(lam)
    raise RuntimeError("pencil returned only the constant mode")


def nash_check(
    op: DivergenceOperator,
    spec: MultiplierSpec,
    phi: np.ndarray,
    r: float,
) -> float:
    """Slack of the Nash inequality for one test function and radius.

    Requires the multiplier to be dominated by the form (pre-scale the
    spec with the measured pencil constant); then

        slack = r^(-2) h(phi) + (2 pi)^(-d) V_F(r) ||phi||_1^2 - ||phi||_2^2

    is non-negative by the lattice Plancherel argument, up to roundoff.
    """
    if op.bc != PERIODIC:
        raise ValueError("the Nash chain is verified on periodic grids")
    grid = op.grid
    phi = np.asarray(phi, dtype=float)
    d = grid.dim
    measure = grid.cell_measure
    l1 = float(np.abs(phi).sum() * measure)
    l2_sq = float((phi**2).sum() * measure)
    h_val = float(phi @ (op.matrix @ phi)) * measure
    v_f = vf_volume(spec, grid, r, allow_full_box=True)
    return r**-2 * h_val + (2.0 * np.pi) ** (-d) * v_f * l1**2 - l2_sq


def multiplier_form_value(op_grid: Grid, spec: MultiplierSpec, phi: np.ndarray) -> float:
    """f(phi) = sum_p F(p) |phi_hat(p)|^2 on the periodic lattice."""
    f_vals = spec.on_lattice(op_grid)
    phi_hat = np.fft.fftn(np.asarray(phi, dtype=float).reshape(op_grid.shape))
    return float(
        np.sum(f_vals * np.abs(phi_hat) ** 2) / op_grid.size * op_grid.cell_measure
    )


# ---------------------------------------------------------------------------
# the Neumann-at-origin variant (strong degeneracy, n = 1)


def _half_modes(lap_origin: sp.csr_matrix, half_cells: np.ndarray):
    sub = lap_origin[np.ix_(half_cells, half_cells)].toarray()
    w, v = np.linalg.eigh(0.5 * (sub + sub.T))
    return np.maximum(w, 0.0), v


def neumann_subelliptic_check(
    grid: Grid,
    d1: float,
    d1p: float = 0.0,
    drop_modes: int = 1,
) -> float:
    """Pencil constant of h against the decoupled-halves multiplier form.

    For strong degeneracy (d1 >= 1/2, n = 1) the full-line multiplier
    comparison degenerates, but the variant built from functions of the
    no-flux-at-origin Laplacian stays bounded below.  Returns the
    smallest generalized eigenvalue of (H, F_N) over modes orthogonal to
    the per-half constants.
    """
    if grid.dim != 1:
        raise ValueError("the Neumann variant is one-dimensional")
    if not 0.5 <= d1 < 1.0:
        raise ValueError("use subelliptic_constant for weak degeneracy (d1 < 1/2)")
    params = GrusinParams(n=1, m=0, d1=d1, d1p=d1p)
    coeff = CoefficientField(params, representative="pure_power")
    op = assemble(grid, coeff, bc=NEUMANN_BOX)

    flat = CoefficientField(GrusinParams(n=1, m=0), representative="pure_power")
    lap_n = assemble(grid, flat, bc=NEUMANN_ORIGIN).matrix

    x = grid.axis_centers(0)
    spec = MultiplierSpec(params, kind="x1_block")
    h_mat = op.matrix.toarray()

    ratios = []
    blocks = []
    for half in (x < 0.0, x > 0.0):
        cells = np.flatnonzero(half)
        w, v = _half_modes(lap_n, cells)
        blocks.append((cells, w, v))
    # basis of both halves' non-constant modes diagonalizes F_N
    basis_cols, f_diag = [], []
    for cells, w, v in blocks:
        order = np.argsort(w)
        for i in order[drop_modes:]:
            col = np.zeros(grid.size)
            col[cells] = v[:, i]
            basis_cols.append(col)
            f_diag.append(spec.evaluate(np.array([w[i]]), np.array([0.0]))[0])
    basis = np.stack(basis_cols, axis=1)
    f_diag = np.asarray(f_diag)
    a_proj = basis.T @ h_mat @ basis
    sym = a_proj / np.sqrt(f_diag)[:, None] / np.sqrt(f_diag)[None, :]
    return float(np.linalg.eigvalsh(0.5 * (sym + sym.T))[0])


def fullline_pencil_constant(grid: Grid, d1: float, d1p: float = 0.0, drop_modes: int = 1) -> float:
    """Contrast value: pencil constant against the coupled-line multiplier.

    Built the same way but from the box Laplacian without origin
    decoupling; for d1 >= 1/2 this value decays to zero under grid
    refinement, which is the computational signature of the failure of
    the full-line comparison in the strongly degenerate regime.
    """
    if grid.dim != 1:
        raise ValueError("one-dimensional check")
    params = GrusinParams(n=1, m=0, d1=d1, d1p=d1p)
    coeff = CoefficientField(params, representative="pure_power")
    op = assemble(grid, coeff, bc=NEUMANN_BOX)
    flat = CoefficientField(GrusinParams(n=1, m=0), representative="pure_power")
    lap = assemble(grid, flat, bc=NEUMANN_BOX).matrix.toarray()
    w, v = np.linalg.eigh(0.5 * (lap + lap.T))
    w = np.maximum(w, 0.0)
    spec = MultiplierSpec(params, kind="x1_block")
    f_diag = spec.evaluate(w[drop_modes:], np.zeros(grid.size - drop_modes))
    basis = v[:, drop_modes:]
    a_proj = basis.T @ op.matrix.toarray() @ basis
    sym = a_proj / np.sqrt(f_diag)[:, None] / np.sqrt(f_diag)[None, :]
    return float(np.linalg.eigvalsh(0.5 * (sym + sym.T))[0])


def neumann_form_decoupling_defect(grid: Grid, d1: float, phi: np.ndarray) -> float:
    """|f_N(phi) - f_N(phi_+) - f_N(phi_-)| for the decoupled multiplier form.

    Zero by construction: the multiplier matrix is block diagonal over
    the two halves.
    """
    flat = CoefficientField(GrusinParams(n=1, m=0), representative="pure_power")
    lap_n = assemble(grid, flat, bc=NEUMANN_ORIGIN).matrix
    params = GrusinParams(n=1, m=0, d1=d1, d1p=0.0)
    spec = MultiplierSpec(params, kind="x1_block")
    x = grid.axis_centers(0)

    def f_n(vec):
        total = 0.0
        for half in (x < 0.0, x > 0.0):
            cells = np.flatnonzero(half)
            w, v = _half_modes(lap_n, cells)
            coeffs = v.T @ vec[cells]
            total += float(np.sum(spec.evaluate(w, np.zeros_like(w)) * coeffs**2))
        return total

    phi = np.asarray(phi, dtype=float)
    phi_plus = np.where(x > 0.0, phi, 0.0)
    phi_minus = np.where(x < 0.0, phi, 0.0)
    return abs(f_n(phi) - f_n(phi_plus) - f_n(phi_minus))
