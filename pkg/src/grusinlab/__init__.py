"""grusinlab: numerical experiments for Grusin-type degenerate operators.

Core objects: parameter algebra (`params`), explicit distance/volume
geometry with a shortest-path oracle (`geometry`), sparse divergence-
form assembly (`assembly`), heat and wave evolution (`heat`, `wave`),
the inequality toolkit (`ineq`), and the experiment runner
(`experiments`, `cli`).
"""

from .assembly import (
    DIRICHLET_BOX,
    DIRICHLET_ORIGIN,
    NEUMANN_BOX,
    NEUMANN_ORIGIN,
    PERIODIC,
    DivergenceOperator,
    Grid,
    assemble,
    assemble_1d_example,
    assemble_approximant,
    cutoff_energy,
    quadratic_form,
)
from .config import ExperimentConfig
from .experiments import EXPERIMENTS, run_experiment
from .geometry import (
    DistanceOracle,
    Point,
    delta_distance,
    doubling_report,
    volume_formula,
)
from .params import (
    CoefficientField,
    DerivedExponents,
    ExponentPair,
    GrusinParams,
    classical_grusin,
    derive_exponents,
    eval_piecewise_power,
    piecewise_power,
)
from .reports import VerificationReport, load_report, write_report

__all__ = [
    "DIRICHLET_BOX",
    "DIRICHLET_ORIGIN",
    "NEUMANN_BOX",
    "NEUMANN_ORIGIN",
    "PERIODIC",
    "DivergenceOperator",
    "DistanceOracle",
    "ExperimentConfig",
    "EXPERIMENTS",
    "ExponentPair",
    "CoefficientField",
    "DerivedExponents",
    "Grid",
    "GrusinParams",
    "Point",
    "VerificationReport",
    "assemble",
    "assemble_1d_example",
    "assemble_approximant",
    "classical_grusin",
    "cutoff_energy",
    "delta_distance",
    "derive_exponents",
    "doubling_report",
    "eval_piecewise_power",
    "load_report",
    "piecewise_power",
    "quadratic_form",
    "run_experiment",
    "volume_formula",
    "write_report",
]

__version__ = "0.1.0"
