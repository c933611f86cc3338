"""Parameter algebra for Grusin-type degenerate operators.

The operators studied here live on R^n x R^m and have block-diagonal
coefficients that vanish like a power of |x_1| near the hyperplane
x_1 = 0 and grow (or decay) like another power at infinity.  Local and
global behaviour is encoded with the two-sided power notation

    a^(s, l) = a^s  if a <= 1,    a^l  if a >= 1,

which this module implements together with the derived dimensional
exponents used throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

X1_BLOCK = "x1_block"
X2_BLOCK = "x2_block"

REPRESENTATIVES = ("smooth", "pure_power", "example_1d")


@dataclass(frozen=True)
class ExponentPair:
    """Exponents (small, large) for the two-sided power a^(small, large)."""

    small: float
    large: float

    def swapped(self) -> "ExponentPair":
        """Pair with the two branches exchanged.

        Satisfies a^(s,l) * (1/a)^(l,s) = 1 for every a > 0.
        """
        return ExponentPair(self.large, self.small)

    def negated(self) -> "ExponentPair":
        return ExponentPair(-self.small, -self.large)


def piecewise_power(a, small: float, large: float):
    """Evaluate a^(small, large); `a` may be a scalar or an array.

    Zero is allowed only with a non-negative small exponent (the value
    is 0, or 1 when the exponent is 0); negative bases are rejected.
    Graceful under/overflow of the hardware power is relied on for
    extreme bases, so unbounded exponents are safe.
    """
    a_arr = np.asarray(a, dtype=float)
    if np.any(a_arr < 0.0):
        raise ValueError("piecewise power requires a non-negative base")
    zero = a_arr == 0.0
    if np.any(zero) and small < 0.0:
        raise ValueError("zero base with negative exponent")
    exponent = np.where(a_arr <= 1.0, small, large)
    with np.errstate(over="ignore", under="ignore"):
        out = np.power(np.where(zero, 1.0, a_arr), exponent)
    if np.any(zero):
        out = np.where(zero, 0.0 if small > 0.0 else 1.0, out)
    if np.isscalar(a) or a_arr.ndim == 0:
        return float(out)
    return out


def eval_piecewise_power(a, e: ExponentPair):
    """a^(e.small, e.large) for a > 0 (strictly positive contract)."""
    a_arr = np.asarray(a, dtype=float)
    if np.any(a_arr <= 0.0):
        raise ValueError("eval_piecewise_power requires a > 0")
    return piecewise_power(a, e.small, e.large)


@dataclass(frozen=True)
class GrusinParams:
    """Degeneracy parameters of the operator family.

    n, m are the dimensions of the x1 / x2 blocks.  (d1, d1p) control the
    local/global degeneracy of the x1 block and must lie in [0, 1);
    (d2, d2p) control the x2 block and are only required non-negative.
    """

    n: int
    m: int
    d1: float = 0.0
    d1p: float = 0.0
    d2: float = 0.0
    d2p: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.m < 0:
            raise ValueError(f"m must be >= 0, got {self.m}")
        for name in ("d1", "d1p"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {v}")
        for name in ("d2", "d2p"):
            v = getattr(self, name)
            if v < 0.0:
                raise ValueError(f"{name} must be >= 0, got {v}")

    @property
    def dim(self) -> int:
        return self.n + self.m


@dataclass(frozen=True)
class DerivedExponents:
    """Exponents derived from the degeneracy parameters.

    D, Dp         local/global dimension governing crossnorm decay and
                  large-ball volume growth
    beta, betap   ball-volume weight n*d1 + m*d2 of the small-radius regime
    rho, rhop     1 + d2 - d1, the x2-reach exponent of the distance
    gamma, gammap d2/rho in [0, 1), large-separation x2 exponent
    alpha, alphap (1 - d1)/rho in (0, 1], x2-block multiplier exponent
    sigma, sigmap 1/(1 - d1), radial scale exponent of large balls
    """

    D: float
    Dp: float
    beta: float
    betap: float
    rho: float
    rhop: float
    gamma: float
    gammap: float
    alpha: float
    alphap: float
    sigma: float
    sigmap: float

    @property
    def doubling_dim(self) -> float:
        return max(self.D, self.Dp)


def derive_exponents(p: GrusinParams) -> DerivedExponents:
    """Compute all derived exponents for a parameter set."""
    rho = 1.0 + p.d2 - p.d1
    rhop = 1.0 + p.d2p - p.d1p
    return DerivedExponents(
        D=(p.n + p.m * rho) / (1.0 - p.d1),
        Dp=(p.n + p.m * rhop) / (1.0 - p.d1p),
        beta=p.n * p.d1 + p.m * p.d2,
        betap=p.n * p.d1p + p.m * p.d2p,
        rho=rho,
        rhop=rhop,
        gamma=p.d2 / rho,
        gammap=p.d2p / rhop,
        alpha=(1.0 - p.d1) / rho,
        alphap=(1.0 - p.d1p) / rhop,
        sigma=1.0 / (1.0 - p.d1),
        sigmap=1.0 / (1.0 - p.d1p),
    )


@dataclass(frozen=True)
class CoefficientField:
    """A concrete representative of the coefficient equivalence class.

    The operator family only fixes the coefficients up to two-sided
    equivalence c(x) ~ |x|^(2*delta, 2*delta'), so a representative must
    be chosen.  Available representatives:

    smooth      c_i(x) = |x|^(2 d_i) (1 + |x|^2)^(d_i' - d_i); one
                continuous formula covering both d <= d' and d >= d'
    pure_power  c_i(x) = |x|^(2 d_i, 2 d_i') piecewise
    example_1d  c(x) = (x^2 / (1 + x^2))^d1; the canonical
                one-dimensional example (requires m = 0, implies a
                bounded coefficient, i.e. global exponent 0)
    """

    params: GrusinParams
    representative: str = "smooth"

    def __post_init__(self):
        if self.representative not in REPRESENTATIVES:
            raise ValueError(
                f"unknown representative {self.representative!r}; "
                f"expected one of {REPRESENTATIVES}"
            )
        if self.representative == "example_1d" and self.params.m != 0:
            raise ValueError("example_1d representative requires m = 0")

    def block_exponents(self, block: str) -> tuple[float, float]:
        p = self.params
        if block == X1_BLOCK:
            return p.d1, p.d1p
        if block == X2_BLOCK:
            if p.m == 0:
                raise ValueError("x2_block requested but m = 0")
            return p.d2, p.d2p
        raise ValueError(f"unknown block {block!r}")

    def __call__(self, block: str, r):
        """Coefficient value at |x_1| = r for the requested block.

        `r` may be a scalar or an array of radii; values are
        non-negative and vanish only at r = 0 (when the local exponent
        is positive).
        """
        d, dp = self.block_exponents(block)
        r_arr = np.asarray(r, dtype=float)
        if np.any(r_arr < 0.0):
            raise ValueError("radius must be non-negative")
        if self.representative == "pure_power":
            return piecewise_power(r, 2.0 * d, 2.0 * dp)
        if self.representative == "example_1d":
            out = (r_arr**2 / (1.0 + r_arr**2)) ** d
            return float(out) if np.isscalar(r) else out
        # smooth: |x|^(2d) (1+|x|^2)^(dp-d)
        out = piecewise_power(r, 2.0 * d, 2.0 * d) * (1.0 + r_arr**2) ** (dp - d)
        return float(out) if np.isscalar(r) else np.asarray(out)


def coefficient(c: CoefficientField, block: str, x1) -> float:
    """Coefficient at the point x1 in R^n (depends only on |x1|)."""
    r = float(np.linalg.norm(np.atleast_1d(np.asarray(x1, dtype=float))))
    return float(c(block, r))


def equivalence_ratio_bounds(
    c1: CoefficientField,
    c2: CoefficientField,
    block: str = X1_BLOCK,
    lo: float = 1e-3,
    hi: float = 1e3,
    samples: int = 2001,
) -> tuple[float, float]:
    """Min and max of c1/c2 over a log-spaced radius sweep.

    Both representatives of the same parameter set must have a ratio
    bounded away from 0 and infinity; the sweep range covers every
    radius a desk-scale grid can produce.
    """
    r = np.geomspace(lo, hi, samples)
    ratio = np.asarray(c1(block, r)) / np.asarray(c2(block, r))
    return float(ratio.min()), float(ratio.max())


def classical_grusin() -> GrusinParams:
    """The classical parameter set n = m = 1, d1 = d1' = 0, d2 = d2' = 1."""
    return GrusinParams(n=1, m=1, d1=0.0, d1p=0.0, d2=1.0, d2p=1.0)


def example_1d_coefficient(delta: float) -> CoefficientField:
    """One-dimensional example field c(x) = (x^2/(1+x^2))^delta."""
    if not 0.0 <= delta < 1.0:
        raise ValueError(f"delta must lie in [0, 1), got {delta}")
    return CoefficientField(
        GrusinParams(n=1, m=0, d1=delta, d1p=0.0), representative="example_1d"
    )


def volume_regime_threshold(p: GrusinParams, x1_norm: float) -> float:
    """Radius |x_1|^(1-d1, 1-d1') separating the two ball-volume regimes."""
    return float(piecewise_power(x1_norm, 1.0 - p.d1, 1.0 - p.d1p))
