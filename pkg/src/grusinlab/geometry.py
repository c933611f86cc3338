"""Explicit quasi-distance, ball volumes and a grid shortest-path oracle.

The Riemannian distance of a degenerate divergence-form operator with
block coefficients (c1(x1), c2(x1)) admits an explicit equivalent
expression

    D(x; y) = |x1 - y1| / (|x1| + |y1|)^(d1, d1')  +  Delta(x; y)

where Delta switches between |x2 - y2| / (|x1| + |y1|)^(d2, d2') and
|x2 - y2|^(1 - gamma, 1 - gamma') depending on whether the x2 offset is
within reach of the available x1 scale.  Ball volumes obey

    |B(x; r)| ~ r^(D, D')            if r >= |x1|^(1 - d1, 1 - d1')
    |B(x; r)| ~ r^(n+m) |x1|^(beta, beta')   otherwise.

Both are implemented exactly, alongside an independent numerical oracle:
shortest paths on the cell graph with edge lengths measured in the
metric c^(-1/2), used to verify the equivalence and the volume law
without circular reasoning.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from .assembly import Grid
from .params import (
    X1_BLOCK,
    X2_BLOCK,
    CoefficientField,
    GrusinParams,
    derive_exponents,
    piecewise_power,
    volume_regime_threshold,
)


@dataclass(frozen=True)
class Point:
    """A point (x1, x2) of R^n x R^m."""

    x1: np.ndarray
    x2: np.ndarray

    @staticmethod
    def of(x1, x2=()) -> "Point":
        return Point(
            np.atleast_1d(np.asarray(x1, dtype=float)),
            np.atleast_1d(np.asarray(x2, dtype=float)),
        )


def _check_dims(p: GrusinParams, a: Point, b: Point):
    for pt in (a, b):
        if pt.x1.size != p.n or pt.x2.size != p.m:
            raise ValueError(
                f"point dimensions ({pt.x1.size}, {pt.x2.size}) do not match "
                f"parameters (n={p.n}, m={p.m})"
            )


def delta_distance(p: GrusinParams, a: Point, b: Point) -> float:
    """Explicit quasi-distance D(a; b); symmetric, zero iff a = b.

    The x2 part is continuous across its branch boundary: at
    |x2 - y2| = (|x1| + |y1|)^(rho, rho') both expressions coincide.
    A vanishing x1 scale routes to the second branch, so nothing is
    ever divided by zero.
    """
    _check_dims(p, a, b)
    e = derive_exponents(p)
    s = float(np.linalg.norm(a.x1) + np.linalg.norm(b.x1))
    dx1 = float(np.linalg.norm(a.x1 - b.x1))
    dx2 = float(np.linalg.norm(a.x2 - b.x2)) if p.m else 0.0

    first = 0.0 if dx1 == 0.0 else dx1 / piecewise_power(s, p.d1, p.d1p)
    if dx2 == 0.0:
        return first
    reach = piecewise_power(s, e.rho, e.rhop)
    if dx2 < reach:
        second = dx2 / piecewise_power(s, p.d2, p.d2p)
    else:
        second = piecewise_power(dx2, 1.0 - e.gamma, 1.0 - e.gammap)
    return first + second


def delta_distance_field(p: GrusinParams, x1: np.ndarray, x2: np.ndarray, y: Point) -> np.ndarray:
    """Vectorized D(.; y) over arrays of coordinates.

    x1 has shape (k, n) and x2 shape (k, m); returns k distances.
    """
    e = derive_exponents(p)
    x1 = np.atleast_2d(np.asarray(x1, dtype=float))
    s = np.linalg.norm(x1, axis=1) + np.linalg.norm(y.x1)
    dx1 = np.linalg.norm(x1 - y.x1[None, :], axis=1)
    with np.errstate(invalid="ignore"):
        first = np.where(dx1 == 0.0, 0.0, dx1 / piecewise_power(s, p.d1, p.d1p))
    if p.m == 0:
        return first
    x2 = np.atleast_2d(np.asarray(x2, dtype=float))
    dx2 = np.linalg.norm(x2 - y.x2[None, :], axis=1)
    reach = piecewise_power(s, e.rho, e.rhop)
    with np.errstate(invalid="ignore", divide="ignore"):
        near = dx2 / piecewise_power(s, p.d2, p.d2p)
    far = piecewise_power(dx2, 1.0 - e.gamma, 1.0 - e.gammap)
    second = np.where(dx2 == 0.0, 0.0, np.where(dx2 < reach, near, far))
    return first + second


VOLUME_REGIME_SMALL = "small_r"
VOLUME_REGIME_LARGE = "large_r"


def volume_regime(p: GrusinParams, x: Point, r: float) -> str:
    threshold = volume_regime_threshold(p, float(np.linalg.norm(x.x1)))
    return VOLUME_REGIME_SMALL if r <= threshold else VOLUME_REGIME_LARGE


def volume_formula(p: GrusinParams, x: Point, r: float) -> float:
    """Model ball volume; the two regime branches agree exactly at the
    regime boundary r = |x1|^(1 - d1, 1 - d1')."""
    if r <= 0.0:
        raise ValueError("radius must be positive")
    e = derive_exponents(p)
    x1n = float(np.linalg.norm(x.x1))
    if volume_regime(p, x, r) == VOLUME_REGIME_LARGE:
        return piecewise_power(r, e.D, e.Dp)
    return r ** (p.n + p.m) * piecewise_power(x1n, e.beta, e.betap)


@dataclass(frozen=True)
class BallEstimate:
    center: Point
    radius: float
    volume_formula: float
    regime: str
    volume_numeric: float | None = None
    truncated: bool = False

    @property
    def ratio(self) -> float | None:
        if self.volume_numeric is None:
            return None
        return self.volume_numeric / self.volume_formula


def _stencil_offsets(dim: int, radius: int = 1) -> np.ndarray:
    """Primitive nonzero offsets within the cube {-radius..radius}^dim.

    radius 1 gives axis plus diagonal moves (8 in 2D, 26 in 3D); larger
    radii add intermediate directions, which matters for strongly
    anisotropic metrics where nearest-neighbour zigzagging overpays.
    Collinear multiples of shorter offsets are dropped.
    """
    rng = np.arange(-radius, radius + 1)
    grids = np.meshgrid(*([rng] * dim), indexing="ij")
    offs = np.stack([g.ravel() for g in grids], axis=1)
    offs = offs[np.any(offs != 0, axis=1)]
    primitive = [
        off for off in offs if np.gcd.reduce(np.abs(off[off != 0])) == 1
    ]
    return np.asarray(primitive)


class DistanceOracle:
    """Shortest-path distance on the cell graph of a grid.

    Edge weight between neighbouring cells u, v (axis or diagonal
    neighbours) is the segment length in the metric c^(-1/2),

        w(u, v) = sqrt( sum_i dx_i^2 / c_i(face) )

    with the face coefficient of each direction taken as the arithmetic
    mean of the two cell-centre coefficient values of the relevant
    block.  All weights are positive because no cell centre lies on the
    degeneracy hyperplane.  The restricted direction set overestimates
    distances by a bounded stencil factor (<= 8% in 2D), which is
    acceptable for equivalence checks up to constants.
    """

    def __init__(self, grid: Grid, coeff: CoefficientField, stencil_radius: int = 1):
        if grid.dim != coeff.params.dim:
            raise ValueError("grid dimension does not match parameters")
        if stencil_radius < 1:
            raise ValueError("stencil radius must be >= 1")
        self.grid = grid
        self.coeff = coeff
        self.params = coeff.params
        self.stencil_radius = stencil_radius
        self._graph = self._build_graph()

    def _cell_block_coefficients(self) -> tuple[np.ndarray, np.ndarray | None]:
        g, p = self.grid, self.params
        r = g.x1_norms(p.n)
        c1 = np.asarray(self.coeff(X1_BLOCK, r))
        c2 = np.asarray(self.coeff(X2_BLOCK, r)) if p.m else None
        return c1, c2

    def _build_graph(self) -> sp.csr_matrix:
        g, p = self.grid, self.params
        shape = g.shape
        size = g.size
        c1, c2 = self._cell_block_coefficients()
        offsets = _stencil_offsets(g.dim, self.stencil_radius)
        # keep one representative of each +/- pair; the graph is symmetrized below
        offsets = offsets[: offsets.shape[0] // 2]

        idx = np.arange(size).reshape(shape)
        rows, cols, weights = [], [], []
        for off in offsets:
            src_slices, dst_slices = [], []
            for axis, o in enumerate(off):
                nax = shape[axis]
                if o >= 0:
                    src_slices.append(slice(0, nax - o))
                    dst_slices.append(slice(o, nax))
                else:
                    src_slices.append(slice(-o, nax))
                    dst_slices.append(slice(0, nax + o))
            u = idx[tuple(src_slices)].ravel()
            v = idx[tuple(dst_slices)].ravel()
            if u.size == 0:
                continue
            length_sq = np.zeros(u.size)
            for axis, o in enumerate(off):
                if o == 0:
                    continue
                c_block = c1 if axis < p.n else c2
                c_face = 0.5 * (c_block[u] + c_block[v])
                length_sq += (o * g.spacing[axis]) ** 2 / c_face
            w = np.sqrt(length_sq)
            rows.append(u)
            cols.append(v)
            weights.append(w)
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        weights = np.concatenate(weights)
        graph = sp.csr_matrix((weights, (rows, cols)), shape=(size, size))
        return graph + graph.T

    def distances_from(self, cell: int) -> np.ndarray:
        """Shortest-path distance from one cell to every cell."""
        d = dijkstra(self._graph, directed=False, indices=cell)
        if not np.all(np.isfinite(d)):
            raise RuntimeError("grid graph is disconnected")
        return d

    def distances_from_set(self, cells) -> np.ndarray:
        """Distance to the nearest cell of a set, for every cell."""
        d = dijkstra(self._graph, directed=False, indices=np.atleast_1d(cells), min_only=True)
        if not np.all(np.isfinite(d)):
            raise RuntimeError("grid graph is disconnected")
        return d

    def set_distance(self, cells_a, cells_b) -> float:
        """Distance between two cell sets (minimum over pairs)."""
        d = self.distances_from_set(cells_a)
        return float(d[np.atleast_1d(cells_b)].min())

    def distance(self, a: int, b: int) -> float:
        return float(self.distances_from(a)[b])

    def ball_volume(self, cell: int, r: float, dist: np.ndarray | None = None) -> tuple[float, bool]:
        """Sum of cell measures at distance < r, plus a truncation flag.

        The flag is set when the ball reaches the outermost cell layer,
        in which case the true ball does not fit inside the box and the
        returned volume undercounts it.
        """
        if r <= 0.0:
            raise ValueError("radius must be positive")
        if dist is None:
            dist = self.distances_from(cell)
        inside = dist < r
        truncated = bool(np.any(inside & self.grid.boundary_mask()))
        return float(np.count_nonzero(inside) * self.grid.cell_measure), truncated

    def ball_estimate(self, cell: int, r: float, dist: np.ndarray | None = None) -> BallEstimate:
        g, p = self.grid, self.params
        center = grid_point(g, p, cell)
        vol, truncated = self.ball_volume(cell, r, dist=dist)
        return BallEstimate(
            center=center,
            radius=r,
            volume_formula=volume_formula(p, center, r),
            regime=volume_regime(p, center, r),
            volume_numeric=vol,
            truncated=truncated,
        )


def grid_point(g: Grid, p: GrusinParams, cell: int) -> Point:
    """The (x1, x2) coordinates of a cell centre."""
    x = g.cell_center(cell)
    return Point(np.asarray(x[: p.n]), np.asarray(x[p.n :]))


def graph_distance(oracle: DistanceOracle, a: int, b: int) -> float:
    return oracle.distance(a, b)


def ball_volume_numeric(oracle: DistanceOracle, cell: int, r: float) -> tuple[float, bool]:
    return oracle.ball_volume(cell, r)


@dataclass
class DoublingSample:
    center: Point
    r: float
    s: float
    ratio: float
    bound_exponent: float

    @property
    def fitted_exponent(self) -> float:
        return float(np.log(self.ratio) / np.log(self.s))


@dataclass
class DoublingReport:
    doubling_dim: float
    samples: list[DoublingSample] = field(default_factory=list)

    @property
    def max_constant(self) -> float:
        """Largest ratio / s^(D v D') over the samples."""
        return max(
            smp.ratio / smp.s**self.doubling_dim for smp in self.samples
        )

    @property
    def max_fitted_exponent(self) -> float:
        return max(smp.fitted_exponent for smp in self.samples)


def doubling_report(p: GrusinParams, samples) -> DoublingReport:
    """Volume-doubling ratios |B(x; s r)| / |B(x; r)| from the formula.

    Each sample is (x, r, s) with s >= 1; the ratio is compared against
    the doubling bound s^(D v D').
    """
    e = derive_exponents(p)
    report = DoublingReport(doubling_dim=e.doubling_dim)
    for x, r, s in samples:
        if s < 1.0:
            raise ValueError("doubling factor s must be >= 1")
        ratio = volume_formula(p, x, s * r) / volume_formula(p, x, r)
        report.samples.append(
            DoublingSample(center=x, r=r, s=s, ratio=ratio, bound_exponent=e.doubling_dim)
        )
    return report
