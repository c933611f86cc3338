"""Wave group cos(t sqrt(H)) and finite propagation speed checks.

The default evolver expands cos(t sqrt(.)) in Chebyshev polynomials on
[0, lambda_max]: with lambda = lambda_max (1 - xi) / 2 one has

    cos(t sqrt(lambda)) = c_0/2 + sum_k c_k T_k(xi),

and the coefficients are computed by Gauss-Chebyshev quadrature.  The
expansion is spectrally accurate, so support leakage measurements are
not polluted by time-stepping dispersion.  A leapfrog integrator is
kept as an independent cross-check; its stability bound and energy
drift are monitored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import DivergenceOperator, power_lambda_max
from .geometry import DistanceOracle


def _chebyshev_coefficients(func, n_terms: int) -> np.ndarray:
    """Chebyshev coefficients of func on [-1, 1] via the cosine rule."""
    k = np.arange(n_terms)
    nodes = np.cos(np.pi * (k + 0.5) / n_terms)
    vals = func(nodes)
    j = np.arange(n_terms)[:, None]
    c = (2.0 / n_terms) * np.sum(vals[None, :] * np.cos(j * np.pi * (k + 0.5) / n_terms), axis=1)
    return c


def cosine_evolve(
    op: DivergenceOperator,
    phi: np.ndarray,
    t: float,
    lambda_max: float | None = None,
    degree: int | None = None,
    tol: float = 1e-12,
) -> np.ndarray:
    """Apply cos(t sqrt(H)) phi by Chebyshev expansion.

    Even in t and exactly the identity at t = 0.  The degree defaults to
    1.5 t sqrt(lambda_max) plus a buffer, enough for spectral accuracy,
    and trailing coefficients below `tol` are dropped.
    """
    phi = np.asarray(phi, dtype=float)
    if t == 0.0:
        return phi.copy()
    t = abs(t)
    lam = power_lambda_max(op) if lambda_max is None else lambda_max
    if degree is None:
        degree = int(np.ceil(1.5 * t * np.sqrt(lam))) + 40

    def f(xi):
        lam_of_xi = 0.5 * lam * (1.0 - xi)
        return np.cos(t * np.sqrt(np.maximum(lam_of_xi, 0.0)))

    c = _chebyshev_coefficients(f, degree)
    keep = np.nonzero(np.abs(c) > tol)[0]
    top = int(keep[-1]) if keep.size else 0

    def apply_xi(v):
        return v - (2.0 / lam) * (op.matrix @ v)

    t_prev = phi
    t_curr = apply_xi(phi)
    acc = 0.5 * c[0] * t_prev
    if top >= 1:
        acc = acc + c[1] * t_curr
    for k in range(2, top + 1):
        t_prev, t_curr = t_curr, 2.0 * apply_xi(t_curr) - t_prev
        acc = acc + c[k] * t_curr
    return acc


@dataclass
class WaveState:
    """Leapfrog state: u^k, u^(k-1), step size and energy diagnostics."""

    op: DivergenceOperator
    current: np.ndarray
    previous: np.ndarray
    tau: float
    elapsed: float = 0.0

    def energy(self) -> float:
        """Discrete leapfrog-conserved energy (kinetic + shifted potential)."""
        v = (self.current - self.previous) / self.tau
        kinetic = float(v @ v)
        potential = float(self.current @ (self.op.matrix @ self.previous))
        return 0.5 * (kinetic + potential) * self.op.grid.cell_measure


def leapfrog_cosine(
    op: DivergenceOperator,
    phi: np.ndarray,
    t: float,
    tau: float | None = None,
    lambda_max: float | None = None,
    return_state: bool = False,
):
    """Approximate cos(t sqrt(H)) phi by leapfrog time stepping.

    The symmetric start u^0 = u^(-1) = phi encodes zero initial
    velocity.  The step is rejected if it violates the stability bound
    tau <= 2 / sqrt(lambda_max).
    """
    phi = np.asarray(phi, dtype=float)
    if t == 0.0:
        return phi.copy()
    t = abs(t)
    lam = power_lambda_max(op) if lambda_max is None else lambda_max
    tau_stable = 2.0 / np.sqrt(lam) if lam > 0 else np.inf
    if tau is None:
        tau = min(tau_stable / 8.0, t)
    if tau > tau_stable:
        raise ValueError(
            f"leapfrog step {tau:.3e} exceeds the stability bound {tau_stable:.3e}"
        )
    steps = max(1, int(round(t / tau)))
    tau = t / steps
    u_prev = phi.copy()
    # half-step start with zero velocity: u^1 = u^0 - (tau^2/2) H u^0
    u_curr = phi - 0.5 * tau**2 * (op.matrix @ phi)
    for _ in range(steps - 1):
        u_prev, u_curr = u_curr, 2.0 * u_curr - u_prev - tau**2 * (op.matrix @ u_curr)
    if return_state:
        return u_curr, WaveState(op=op, current=u_curr, previous=u_prev, tau=tau, elapsed=t)
    return u_curr


def propagation_leakage(
    op: DivergenceOperator,
    oracle: DistanceOracle,
    cells_a: np.ndarray,
    t: float,
    slack: float = 0.1,
    lambda_max: float | None = None,
) -> float:
    """Squared-norm fraction of cos(t sqrt(H)) 1_A outside the inflated set.

    The inflated set is {x : d_graph(x, A) <= (1 + slack) t}; the slack
    absorbs the bounded distortion of the grid metric.  The set must not
    touch the box boundary, otherwise reflections would corrupt the
    measurement.
    """
    g = op.grid
    dist = oracle.distances_from_set(np.atleast_1d(cells_a))
    inflated = dist <= (1.0 + slack) * t
    if np.any(inflated & g.boundary_mask()):
        raise ValueError("inflated set reaches the box boundary; enlarge the box")
    ind = np.zeros(g.size)
    ind[np.atleast_1d(cells_a)] = 1.0
    u = cosine_evolve(op, ind, t, lambda_max=lambda_max)
    total = float(ind @ ind)
    outside = float(u[~inflated] @ u[~inflated])
    return outside / total


def local_equality_check(
    op1: DivergenceOperator,
    op2: DivergenceOperator,
    cells_a: np.ndarray,
    rho: float,
    t: float,
    slack: float = 0.1,
    enforce_hypothesis: bool = True,
) -> float:
    """Sup difference of cos(t sqrt(H1)) 1_A and cos(t sqrt(H2)) 1_A.

    For operators whose coefficients agree outside a region at distance
    rho from A, the difference vanishes (up to discretization error)
    whenever |t| <= rho.  With enforce_hypothesis the call rejects
    t > (1 - slack) rho; the contrast regime t > rho can be probed
    explicitly by disabling it.
    """
    if enforce_hypothesis and abs(t) > (1.0 - slack) * rho:
        raise ValueError(f"t = {t} is outside the propagation hypothesis t <= (1-slack) rho")
    ind = np.zeros(op1.size)
    ind[np.atleast_1d(cells_a)] = 1.0
    u1 = cosine_evolve(op1, ind, t)
    u2 = cosine_evolve(op2, ind, t)
    return float(np.max(np.abs(u1 - u2)))


def double_angle_defect(op: DivergenceOperator, phi: np.ndarray, t: float) -> float:
    """Sup defect of 2 cos(t sqrt(H))^2 - 1 = cos(2t sqrt(H)) applied to phi."""
    lam = power_lambda_max(op)
    once = cosine_evolve(op, phi, t, lambda_max=lam)
    twice = cosine_evolve(op, once, t, lambda_max=lam)
    direct = cosine_evolve(op, phi, 2.0 * t, lambda_max=lam)
    return float(np.max(np.abs(2.0 * twice - phi - direct)))
