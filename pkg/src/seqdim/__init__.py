"""Certify lower bounds on quantum dimension from sequential measurement statistics.

The package certifies that observed statistics of sequential projective
measurements cannot arise from a quantum system of dimension at most d, via
semidefinite relaxations of the fixed-dimension moment-matrix set, robustness
visibilities and dual dimension witnesses.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("seqdim")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0.dev0"

from .basis import Basis, BasisBuildError, CardinalityTable, build_basis, classify, rank_oracle
from .certify import (
    CERTIFIED_MARGIN,
    Objective,
    RobustnessResult,
    SolverFailure,
    Witness,
    WitnessReport,
    dual_direct,
    gyni_objective,
    max_finite,
    max_unrestricted,
    robustness,
    verify_witness,
)
from .estimator import DimensionCertifier
from .experiments import (
    Campaign,
    CampaignResult,
    estimate_probability,
    gyni_report,
    probability_curve,
    ququart_hunt,
    visibility_distribution,
)
from .quantum import (
    Behavior,
    MeasurementSet,
    MomentMatrix,
    StatePrep,
    behavior_of,
    born_probability,
    haar_unitary,
    moment_matrix,
    random_measurements,
    random_state,
    sequence_operator,
)
from .sdp import ConicProblem, CvxoptSolver, InteriorPointSolver, Solution, Tolerances, embed_hermitian, solve
from .words import IDENTITY, ZERO, Scenario, WordIndex, enumerate_words, product, simplify

__all__ = [
    "__version__",
    "Scenario", "WordIndex", "enumerate_words", "simplify", "product", "IDENTITY", "ZERO",
    "StatePrep", "MeasurementSet", "MomentMatrix", "Behavior",
    "haar_unitary", "random_state", "random_measurements", "sequence_operator",
    "born_probability", "moment_matrix", "behavior_of",
    "Basis", "BasisBuildError", "CardinalityTable", "build_basis", "rank_oracle", "classify",
    "ConicProblem", "Solution", "Tolerances", "InteriorPointSolver", "CvxoptSolver",
    "solve", "embed_hermitian",
    "Objective", "Witness", "RobustnessResult", "WitnessReport", "SolverFailure",
    "CERTIFIED_MARGIN", "max_unrestricted", "max_finite", "robustness", "dual_direct",
    "verify_witness", "gyni_objective",
    "Campaign", "CampaignResult", "estimate_probability", "visibility_distribution",
    "probability_curve", "gyni_report", "ququart_hunt",
    "DimensionCertifier",
]
