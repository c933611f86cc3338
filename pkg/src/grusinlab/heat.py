"""Heat semigroup evolution and kernel-bound experiments.

The default evolver is Crank-Nicolson with a cached sparse LU
factorization.  Each step applies the rational function
(I - a H)(I + a H)^{-1}, a self-adjoint contraction for PSD H, so
composition over steps is an exact discrete semigroup and the
constant vector is preserved exactly for no-flux boxes (mass
conservation holds to solver roundoff).  A Krylov-type exponential
evolver (`evolve_expm`) provides an independent cross-check free of
time-discretization error.

Experiments implemented on top of kernel columns:

  * conservation and positivity of kernel slices
  * crossnorm decay sup K_t ~ t^(-D/2, -D'/2) with log-log slope fits
  * Gaussian upper ratio against the volume/distance bound
  * on-diagonal lower ratio K_t(y; y) |B(y; sqrt t)|
  * transmitted mass across the degeneracy hyperplane (separation)
  * gap between the no-flux and origin-absorbing realizations
  * strong convergence of clamped/shifted approximants
  * kernel comparison against a frozen-coefficient operator
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import ive

from .assembly import (
    DIRICHLET_ORIGIN,
    NEUMANN_BOX,
    DivergenceOperator,
    Grid,
    assemble,
    assemble_approximant,
    power_lambda_max,
)
from .geometry import (
    delta_distance_field,
    grid_point,
    volume_formula,
)
from .params import (
    X1_BLOCK,
    CoefficientField,
    GrusinParams,
    piecewise_power,
)

MASS_TOL = 1e-8
NEGATIVITY_REL_TOL = 1e-12
TRUNCATION_TOL = 1e-6


class CrankNicolson:
    """Crank-Nicolson stepper with reusable factorizations per step size.

    `startup` Crank-Nicolson steps can be replaced by pairs of implicit
    Euler half-steps.  This damps the undamped high modes excited by
    rough data (kernel columns start from a scaled indicator) while
    keeping second-order accuracy and exact mass conservation; with
    startup = 0 the stepper is the pure rational propagator
    ((I - a H)(I + a H)^{-1})^steps and composes exactly over steps.
    """

    def __init__(self, op: DivergenceOperator):
        self.op = op
        self._cache: dict = {}

    def _solver_for(self, key, matrix_builder):
        if key not in self._cache:
            self._cache[key] = spla.factorized(matrix_builder().tocsc())
        return self._cache[key]

    def _cn_step(self, u: np.ndarray, tau: float) -> np.ndarray:
        eye = sp.identity(self.op.size, format="csr")
        forward = self._cache.setdefault(
            ("fw", tau), (eye - 0.5 * tau * self.op.matrix).tocsr()
        )
        solve = self._solver_for(
            ("cn", tau), lambda: sp.identity(self.op.size) + 0.5 * tau * self.op.matrix
        )
        rhs = forward @ u
        out = solve(rhs)
        self._check_residual(out, rhs, 0.5 * tau)
        return out

    def _euler_step(self, u: np.ndarray, tau: float) -> np.ndarray:
        solve = self._solver_for(
            ("be", tau), lambda: sp.identity(self.op.size) + tau * self.op.matrix
        )
        out = solve(u)
        self._check_residual(out, u, tau)
        return out

    def _check_residual(self, out, rhs, a):
        residual = np.linalg.norm(out + a * (self.op.matrix @ out) - rhs)
        scale = np.linalg.norm(rhs)
        if scale > 0 and residual > 1e-8 * scale:
            raise RuntimeError(f"linear solve failed: relative residual {residual / scale:.3e}")

    def run(self, phi: np.ndarray, t: float, steps: int, startup: int = 0) -> np.ndarray:
        if steps < 1:
            raise ValueError("steps must be >= 1")
        if t <= 0.0:
            raise ValueError("time must be positive")
        startup = min(startup, steps)
        tau = t / steps
        u = np.asarray(phi, dtype=float).copy()
        for _ in range(startup):
            u = self._euler_step(u, 0.5 * tau)
            u = self._euler_step(u, 0.5 * tau)
        for _ in range(steps - startup):
            u = self._cn_step(u, tau)
        return u


def evolve(op: DivergenceOperator, phi: np.ndarray, t: float, steps: int = 40) -> np.ndarray:
    """Apply the heat semigroup e^(-tH) by Crank-Nicolson."""
    return CrankNicolson(op).run(phi, t, steps)


def evolve_expm(op: DivergenceOperator, phi: np.ndarray, t: float) -> np.ndarray:
    """Apply e^(-tH) through the matrix-exponential action (cross-check)."""
    if t <= 0.0:
        raise ValueError("time must be positive")
    return spla.expm_multiply(-t * op.matrix.tocsc(), np.asarray(phi, dtype=float))


def evolve_chebyshev(
    op: DivergenceOperator,
    phi: np.ndarray,
    t: float,
    tol: float = 1e-14,
    lambda_max: float | None = None,
) -> np.ndarray:
    """Apply e^(-tH) by a Chebyshev expansion on [0, lambda_max].

    With the spectrum mapped to xi = 1 - 2 lambda / lambda_max the
    propagator is e^(-a) e^(a xi) with a = t lambda_max / 2, whose
    Chebyshev coefficients are the scaled Bessel values e^(-a) I_k(a).
    Spectrally accurate at ~ sqrt(a) terms and free of time-stepping
    error; serves as the independent cross-check of Crank-Nicolson and
    as the evolver for experiments that resolve tiny kernel
    differences.
    """
    if t <= 0.0:
        raise ValueError("time must be positive")
    lam = power_lambda_max(op) if lambda_max is None else lambda_max
    a = 0.5 * t * lam
    kmax = int(np.ceil(a + 12.0 * np.sqrt(a + 1.0) + 30.0))
    coeffs = ive(np.arange(kmax + 1), a)
    keep = np.nonzero(coeffs > tol * coeffs[0])[0]
    kmax = int(keep[-1]) if keep.size else 0

    phi = np.asarray(phi, dtype=float)
    # T_k recurrence in xi; H acts as xi = I - (2 / lambda) H
    def apply_xi(v):
        return v - (2.0 / lam) * (op.matrix @ v)

    t_prev = phi
    t_curr = apply_xi(phi)
    acc = coeffs[0] * t_prev
    if kmax >= 1:
        acc = acc + 2.0 * coeffs[1] * t_curr
    for k in range(2, kmax + 1):
        t_prev, t_curr = t_curr, 2.0 * apply_xi(t_curr) - t_prev
        acc = acc + 2.0 * coeffs[k] * t_curr
    return acc


@dataclass
class KernelSlice:
    """One kernel column K_t(. ; y) as a grid function per unit volume."""

    op: DivergenceOperator
    source_cell: int
    t: float
    values: np.ndarray
    boundary_mass: float

    @property
    def grid(self) -> Grid:
        return self.op.grid

    @property
    def mass(self) -> float:
        return float(self.values.sum() * self.grid.cell_measure)

    @property
    def truncated(self) -> bool:
        return self.boundary_mass > TRUNCATION_TOL

    @property
    def min_value(self) -> float:
        return float(self.values.min())

    def check_invariants(self):
        vmax = float(self.values.max())
        if self.min_value < -NEGATIVITY_REL_TOL * max(vmax, 1.0):
            raise AssertionError(f"kernel slice has negative values: {self.min_value:.3e}")
        if self.op.bc == NEUMANN_BOX and abs(self.mass - 1.0) > MASS_TOL:
            raise AssertionError(f"kernel mass defect {self.mass - 1.0:.3e}")


def kernel_column(
    op: DivergenceOperator,
    y_cell: int,
    t: float,
    steps: int = 40,
    method: str = "cn",
    stepper: CrankNicolson | None = None,
    lambda_max: float | None = None,
) -> KernelSlice:
    """Evolve the normalized indicator of a cell to get K_t(. ; y)."""
    g = op.grid
    phi = np.zeros(op.size)
    phi[y_cell] = 1.0 / g.cell_measure
    if method == "cn":
        values = (stepper or CrankNicolson(op)).run(phi, t, steps, startup=2)
    elif method == "chebyshev":
        values = evolve_chebyshev(op, phi, t, lambda_max=lambda_max)
    elif method == "expm":
        values = evolve_expm(op, phi, t)
    else:
        raise ValueError(f"unknown evolver {method!r}")
    boundary = g.boundary_mask(layers=2)
    boundary_mass = float(values[boundary].sum() * g.cell_measure)
    return KernelSlice(op=op, source_cell=y_cell, t=t, values=values, boundary_mass=boundary_mass)


def _degeneracy_scan_cells(g: Grid, p: GrusinParams, coarse: int = 4) -> list[int]:
    """Source cells for crossnorm scans: a coarse sub-lattice of the x1
    axis that always includes the cells hugging x1 = 0."""
    n0 = g.shape[0]
    axis_indices = {n0 // 2 - 1, n0 // 2}
    axis_indices.update(int(i) for i in np.linspace(0, n0 - 1, coarse).round())
    cells = []
    mid = tuple(s // 2 for s in g.shape[1:])
    for i in sorted(axis_indices):
        cells.append(int(np.ravel_multi_index((i, *mid), g.shape)))
    return cells


@dataclass
class CrossnormPoint:
    t: float
    sup_kernel: float
    truncated: bool


@dataclass
class CrossnormScan:
    points: list[CrossnormPoint]

    def slope(self, t_lo: float, t_hi: float) -> float:
        """Least-squares slope of log sup K_t against log t on [t_lo, t_hi]."""
        ts = np.array([q.t for q in self.points if t_lo <= q.t <= t_hi and not q.truncated])
        vals = np.array(
            [q.sup_kernel for q in self.points if t_lo <= q.t <= t_hi and not q.truncated]
        )
        if ts.size < 2:
            raise ValueError("not enough untruncated scan points in the window")
        return float(np.polyfit(np.log(ts), np.log(vals), 1)[0])


def crossnorm_scan(
    op: DivergenceOperator,
    p: GrusinParams,
    times,
    steps: int = 48,
    sources: list[int] | None = None,
) -> CrossnormScan:
    """Estimate sup_{x,y} K_t over a source scan for each time.

    The maximizing source sits at the degeneracy hyperplane for these
    operators, so the scan always includes the cells next to x1 = 0.
    Truncated slices are flagged and excluded from slope fits.
    """
    g = op.grid
    if sources is None:
        sources = _degeneracy_scan_cells(g, p)
    stepper = CrankNicolson(op)
    points = []
    for t in sorted(times):
        sup_k, truncated = 0.0, True
        for y in sources:
            sl = kernel_column(op, y, t, steps=steps, stepper=stepper)
            if sl.truncated:
                continue
            truncated = False
            sup_k = max(sup_k, float(sl.values.max()))
        points.append(CrossnormPoint(t=t, sup_kernel=sup_k, truncated=truncated))
    return CrossnormScan(points=points)


def gaussian_ratio(slice_: KernelSlice, p: GrusinParams, eps: float) -> float:
    """Empirical constant of the Gaussian upper bound.

    Returns sup over cells x of

        K_t(x; y) * sqrt(|B(x; sqrt t)| |B(y; sqrt t)|)
                  * exp(+ D(x; y)^2 / (4 (1 + eps) t)).

    Finiteness and stability of this value across refinements is the
    checkable content of the upper bound; the constant itself is free.
    """
    if not 0.0 < eps <= 1.0:
        raise ValueError("eps must lie in (0, 1]")
    if slice_.truncated:
        raise ValueError("gaussian ratio needs an untruncated slice")
    g = slice_.grid
    t = slice_.t
    coords = g.coordinate_arrays()
    x1 = coords[:, : p.n]
    x2 = coords[:, p.n :]
    y = grid_point(g, p, slice_.source_cell)
    dist = delta_distance_field(p, x1, x2, y)
    root_t = np.sqrt(t)
    vol_y = volume_formula(p, y, root_t)
    vols = _volume_formula_field(p, x1, root_t)
    weight = np.sqrt(vols * vol_y) * np.exp(dist**2 / (4.0 * (1.0 + eps) * t))
    return float(np.max(slice_.values * weight))


def _volume_formula_field(p: GrusinParams, x1: np.ndarray, r: float) -> np.ndarray:
    """Vectorized ball-volume formula over an array of x1 coordinates."""
    from .params import derive_exponents

    e = derive_exponents(p)
    x1n = np.linalg.norm(np.atleast_2d(x1), axis=1)
    threshold = piecewise_power(x1n, 1.0 - p.d1, 1.0 - p.d1p)
    large = piecewise_power(r, e.D, e.Dp)
    small = r ** (p.n + p.m) * piecewise_power(x1n, e.beta, e.betap)
    return np.where(r >= threshold, large, small)


def ondiag_lower_ratio(
    op: DivergenceOperator,
    p: GrusinParams,
    samples,
    steps: int = 48,
) -> float:
    """Minimum of K_t(y; y) |B(y; sqrt t)| over (cell, t) samples.

    The diagonal cell value is a small-set average, which is the
    grid-scale version of the averaged on-diagonal lower bound.
    """
    ratios = []
    for y_cell, t in samples:
        sl = kernel_column(op, y_cell, t, steps=steps)
        if sl.truncated:
            raise ValueError(f"truncated slice at (cell={y_cell}, t={t})")
        y = grid_point(op.grid, p, y_cell)
        ratios.append(float(sl.values[y_cell]) * volume_formula(p, y, np.sqrt(t)))
    return float(min(ratios))


@dataclass
class SeparationResult:
    delta1: float
    t: float
    cells: int
    transmitted: float
    argmax_on_source_side: bool


def separation_flux(
    delta1: float,
    t: float,
    grid: Grid,
    steps: int = 48,
    d1p: float | None = None,
) -> SeparationResult:
    """Mass transmitted across x1 = 0 from a unit mass at x = -1/2.

    For strong degeneracy (delta1 >= 1/2) the transmitted mass must
    vanish under grid refinement (the discrete conductance across the
    origin is an under-resolved divergent resistance); for weak
    degeneracy it converges to a positive limit.
    """
    if grid.dim != 1:
        raise ValueError("separation experiments are one-dimensional")
    field_params = GrusinParams(n=1, m=0, d1=delta1, d1p=delta1 if d1p is None else d1p)
    coeff = CoefficientField(field_params, representative="pure_power")
    op = assemble(grid, coeff, bc=NEUMANN_BOX)
    src = grid.cell_at([-0.5])
    phi = np.zeros(grid.size)
    phi[src] = 1.0 / grid.cell_measure
    u = evolve(op, phi, t, steps=steps)
    x = grid.axis_centers(0)
    transmitted = float(u[x > 0].sum() * grid.cell_measure)
    argmax_side = x[int(np.argmax(u))] < 0.0
    return SeparationResult(
        delta1=delta1,
        t=t,
        cells=grid.shape[0],
        transmitted=transmitted,
        argmax_on_source_side=argmax_side,
    )


def dirichlet_neumann_gap(
    delta1: float,
    t: float,
    grid: Grid,
    sources=(-0.5, -0.25, 0.25, 0.5),
    steps: int = 48,
) -> float:
    """Sup gap between kernel columns of the no-flux box operator and the
    origin-absorbing (Dirichlet at x1 = 0) operator.

    The gap trend under refinement realizes the boundary-condition
    dichotomy: it vanishes for delta1 in [1/2, 1) and has a positive
    limit for delta1 in [0, 1/2).  The absorbed kernel is dominated by
    the no-flux kernel entrywise.
    """
    if grid.dim != 1:
        raise ValueError("the gap experiment is one-dimensional")
    coeff = CoefficientField(
        GrusinParams(n=1, m=0, d1=delta1, d1p=delta1), representative="pure_power"
    )
    op_n = assemble(grid, coeff, bc=NEUMANN_BOX)
    op_d = assemble(grid, coeff, bc=DIRICHLET_ORIGIN)
    gap = 0.0
    for x0 in sources:
        y = grid.cell_at([x0])
        kn = kernel_column(op_n, y, t, steps=steps)
        kd = kernel_column(op_d, y, t, steps=steps)
        gap = max(gap, float(np.max(np.abs(kn.values - kd.values))))
    return gap


def kernel_domination_defect(
    delta1: float, t: float, grid: Grid, source: float = -0.5, steps: int = 48
) -> float:
    """Largest violation of K_dirichlet <= K_neumann (should be ~0)."""
    coeff = CoefficientField(
        GrusinParams(n=1, m=0, d1=delta1, d1p=delta1), representative="pure_power"
    )
    y = grid.cell_at([source])
    kn = kernel_column(assemble(grid, coeff, bc=NEUMANN_BOX), y, t, steps=steps)
    kd = kernel_column(assemble(grid, coeff, bc=DIRICHLET_ORIGIN), y, t, steps=steps)
    return float(np.max(kd.values - kn.values))


def approximant_convergence(
    grid: Grid,
    coeff: CoefficientField,
    phi: np.ndarray,
    t: float,
    caps_and_eps,
    steps: int = 48,
) -> list[tuple[float, float, float, float]]:
    """L1 gaps ||(S_t^(cap, eps) - S_t) phi||_1 over regularizations.

    Entries of `caps_and_eps` are (n_cap, eps) pairs; eps = 0 short-
    circuits to the unregularized operator (gap identically zero when
    the cap is inactive).
    """
    base = assemble(grid, coeff, bc=NEUMANN_BOX)
    u_ref = evolve(base, phi, t, steps=steps)
    out = []
    for n_cap, eps in caps_and_eps:
        if eps == 0.0:
            op = base
        else:
            op = assemble_approximant(grid, coeff, n_cap=n_cap, eps=eps, bc=NEUMANN_BOX)
        u = evolve(op, phi, t, steps=steps)
        gap_l1 = float(np.abs(u - u_ref).sum() * grid.cell_measure)
        gap_l2 = float(np.sqrt(((u - u_ref) ** 2).sum() * grid.cell_measure))
        out.append((n_cap, eps, gap_l1, gap_l2))
    return out


@dataclass
class ComparisonSetup:
    """Degenerate operator vs. a locally frozen strongly elliptic one.

    The frozen operator keeps the coefficients outside |x1| > r/2 and
    replaces them inside by their values at |x1| = r/2, which dominates
    the degenerate coefficients pointwise and is strongly elliptic.
    `patch_cells` is the evaluation patch A and `rho` its distance to
    the modified region U = {|x1| <= r/2} in the frozen metric.
    """

    op_degenerate: DivergenceOperator
    op_frozen: DivergenceOperator
    patch_cells: np.ndarray
    rho: float
    dims: tuple[float, float]


def frozen_comparison_setup(
    grid: Grid,
    coeff: CoefficientField,
    r: float,
    patch_center: float,
    patch_half_width: float,
) -> ComparisonSetup:
    """Build the frozen-coefficient comparison for a patch on the x1 axis."""
    p = coeff.params
    freeze_radius = r / 2.0

    def frozen(block, radii):
        radii = np.asarray(radii, dtype=float)
        return np.asarray(coeff(block, np.maximum(radii, freeze_radius)))

    op_deg = assemble(grid, coeff, bc=NEUMANN_BOX)
    op_fro = assemble(grid, coeff, bc=NEUMANN_BOX, coefficient_override=frozen)

    coords = grid.coordinate_arrays()
    x1n = np.linalg.norm(coords[:, : p.n], axis=1)
    patch = np.abs(x1n - patch_center) < patch_half_width
    if not np.any(patch):
        raise ValueError("empty comparison patch")
    rho = _frozen_metric_distance(coeff, freeze_radius, patch_center - patch_half_width)
    if rho <= 0.0:
        raise ValueError("patch must be separated from the frozen region")
    from .params import derive_exponents

    e = derive_exponents(p)
    return ComparisonSetup(
        op_degenerate=op_deg,
        op_frozen=op_fro,
        patch_cells=np.flatnonzero(patch),
        rho=rho,
        dims=(e.D, e.Dp),
    )


def _frozen_metric_distance(coeff: CoefficientField, a: float, b: float, nsub: int = 4000) -> float:
    """Distance along the x1 axis in the metric c1^(-1/2) (quadrature)."""
    s = np.linspace(a, b, nsub)
    c = np.asarray(coeff(X1_BLOCK, np.abs(s)))
    return float(np.trapz(1.0 / np.sqrt(c), s))


def compare_kernels(
    setup: ComparisonSetup,
    t: float,
    steps: int = 64,
    n_sources: int = 3,
) -> tuple[float, float]:
    """Measured sup_{x,y in A} |K_frozen - K_degenerate| and the bound shape.

    The bound shape is V(t^2/rho^2)^(-1) (rho^2/t)^(-1/2) e^(-rho^2/4t)
    with V(s) = s^(D/2, D'/2); one global constant per parameter set is
    fitted by the caller, only the shape is produced here.
    """
    patch = setup.patch_cells
    rho = setup.rho
    sources = patch[np.linspace(0, patch.size - 1, n_sources).round().astype(int)]
    lam1 = power_lambda_max(setup.op_frozen)
    lam2 = power_lambda_max(setup.op_degenerate)
    measured = 0.0
    for y in np.unique(sources):
        k1 = kernel_column(setup.op_frozen, int(y), t, method="chebyshev", lambda_max=lam1)
        k2 = kernel_column(setup.op_degenerate, int(y), t, method="chebyshev", lambda_max=lam2)
        measured = max(measured, float(np.max(np.abs(k1.values[patch] - k2.values[patch]))))
    D, Dp = setup.dims
    s = t**2 / rho**2
    shape = (
        1.0 / piecewise_power(s, D / 2.0, Dp / 2.0)
        * (rho**2 / t) ** (-0.5)
        * np.exp(-(rho**2) / (4.0 * t))
    )
    return measured, float(shape)


def davies_gaffney_defect(
    op: DivergenceOperator,
    dist_graph: float,
    cells_a: np.ndarray,
    cells_b: np.ndarray,
    t: float,
    slack: float = 0.1,
) -> float:
    """Slack of the L2 off-diagonal bound for indicator data.

    Returns bound - value with
    value = (1_A, S_t 1_B) and
    bound = exp(-((1 - slack) d)^2 / (4 t)) ||1_A||_2 ||1_B||_2,
    using the graph distance d between the cell sets; the slack absorbs
    the bounded stencil distortion of the grid metric.
    """
    g = op.grid
    ind_b = np.zeros(op.size)
    ind_b[cells_b] = 1.0
    u = evolve_chebyshev(op, ind_b, t)
    value = float(u[cells_a].sum() * g.cell_measure)
    norm_a = np.sqrt(cells_a.size * g.cell_measure)
    norm_b = np.sqrt(cells_b.size * g.cell_measure)
    bound = float(np.exp(-(((1.0 - slack) * dist_graph) ** 2) / (4.0 * t)) * norm_a * norm_b)
    return bound - value


def kernel_cauchy_schwarz_defect(
    op: DivergenceOperator,
    cells_x: np.ndarray,
    cells_y: np.ndarray,
    t: float,
) -> float:
    """Slack of sup-form K_t(X;Y)^2 <= K_t(X;X) K_t(Y;Y) over cell sets.

    Uses an even-step Crank-Nicolson propagator, for which the bound is
    an exact matrix inequality.
    """
    g = op.grid
    stepper = CrankNicolson(op)

    def set_sup(a_cells, b_cells):
        sup = 0.0
        for y in b_cells:
            phi = np.zeros(op.size)
            phi[y] = 1.0 / g.cell_measure
            col = stepper.run(phi, t, steps=16)
            sup = max(sup, float(col[a_cells].max()))
        return sup

    kxy = set_sup(cells_x, cells_y)
    kxx = set_sup(cells_x, cells_x)
    kyy = set_sup(cells_y, cells_y)
    return kxx * kyy - kxy**2
