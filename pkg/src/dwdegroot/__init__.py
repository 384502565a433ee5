"""Degree-weighted DeGroot learning on stochastic block models."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("dwdegroot")
except PackageNotFoundError:
    __version__ = "0.0.0"

from .dynamics import (
    BeliefVector,
    ConsensusWeights,
    LearningMatrix,
    build_learning_matrix,
    consensus_limit,
    convergence_distance,
    iterate_beliefs,
)
from .estimator import DegreeWeightedDeGroot
from .netgen import (
    BlockModelSpec,
    EliteGrassrootsSpec,
    Graph,
    PerturbationSpec,
    check_assumptions,
    expected_adjacency,
    perturb,
    sample_adjacency,
)
from .spectra import (
    classify_regime,
    eigen_symmetrized,
    lambda2_closed_form,
    reduce_block_matrix,
    worst_initial_beliefs,
)
from .weightfn import WeightFunction, custom, g, g_inverse, power, validate_properties

__all__ = [
    "BeliefVector",
    "BlockModelSpec",
    "ConsensusWeights",
    "DegreeWeightedDeGroot",
    "EliteGrassrootsSpec",
    "Graph",
    "LearningMatrix",
    "PerturbationSpec",
    "WeightFunction",
    "build_learning_matrix",
    "check_assumptions",
    "classify_regime",
    "consensus_limit",
    "convergence_distance",
    "custom",
    "eigen_symmetrized",
    "expected_adjacency",
    "g",
    "g_inverse",
    "iterate_beliefs",
    "lambda2_closed_form",
    "perturb",
    "power",
    "reduce_block_matrix",
    "sample_adjacency",
    "validate_properties",
    "worst_initial_beliefs",
]
