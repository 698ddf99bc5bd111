"""Symmetric MPS Born machines for linearly constrained binary optimization.

The package models probability distributions over bitstrings x in {0,1}^n
that satisfy integer equality constraints A x = b. Constraints are encoded
as conserved charges of a matrix product state, so every sample drawn from
the model is feasible by construction. On top of the model sit a DMRG-style
trainer on cost-weighted data and a generator-enhanced optimization loop.
"""

from .charges import Charge, ChargedIndex, Direction, fuse, make_charge, negate, zero
from .block_tensor import (
    BlockStructureError,
    BlockTensor,
    SplitResult,
    absorb_bond_matrix,
    contract,
    direct_sum,
    merge_two_site,
    svd_split,
)
from .symmps import (
    SymMPS,
    as_bits,
    canonicalize,
    enumerate_support,
    mps_direct_sum,
    normalize,
    right_environments,
    support_size,
    validate_mps,
)
from .constraint_builder import (
    ConstraintSystem,
    ConstraintViolation,
    Skeleton,
    build_assignment_mps,
    build_cardinality_mps,
    embed_method1,
    embed_method2,
    exact_skeleton,
    expand_degeneracy,
    link_charges_for_bitstring,
    random_mps,
    skeleton_from_link_charges,
    skeleton_from_transitions,
    skeleton_to_mps,
    uniform_fill,
    validate_seeds,
)
from .trainer import (
    TrainConfig,
    WeightedTrainingSet,
    ZeroAmplitudeError,
    gradient_two_site,
    nll,
    softmax_weights,
    sweep,
    train,
)
from .sampler import (
    SampleBatch,
    coverage,
    g_sol,
    kl_divergence,
    sample,
    sample_batch,
    utility,
)
from .geo import (
    GeoConfig,
    GeoResult,
    IterationRecord,
    ValidityScreen,
    elite_select,
    geo_run,
    iteration_temperature,
    negative_separation_cost,
    uniform_dense_mps,
    vanilla_geo_run,
)
from .model_io import load_mps, mps_from_bytes, mps_to_bytes, save_mps
from .oracles import (
    SolutionSet,
    degeneracy_count,
    enumerate_solutions,
    random_valid_search,
    solve_single_equality_dp,
    solve_single_equality_mitm,
)

__all__ = [
    "Charge",
    "ChargedIndex",
    "Direction",
    "fuse",
    "make_charge",
    "negate",
    "zero",
    "BlockStructureError",
    "BlockTensor",
    "SplitResult",
    "absorb_bond_matrix",
    "contract",
    "direct_sum",
    "merge_two_site",
    "svd_split",
    "SymMPS",
    "as_bits",
    "canonicalize",
    "enumerate_support",
    "mps_direct_sum",
    "normalize",
    "right_environments",
    "support_size",
    "validate_mps",
    "ConstraintSystem",
    "ConstraintViolation",
    "Skeleton",
    "build_assignment_mps",
    "build_cardinality_mps",
    "embed_method1",
    "embed_method2",
    "exact_skeleton",
    "expand_degeneracy",
    "link_charges_for_bitstring",
    "random_mps",
    "skeleton_from_link_charges",
    "skeleton_from_transitions",
    "skeleton_to_mps",
    "uniform_fill",
    "validate_seeds",
    "TrainConfig",
    "WeightedTrainingSet",
    "ZeroAmplitudeError",
    "gradient_two_site",
    "nll",
    "softmax_weights",
    "sweep",
    "train",
    "SampleBatch",
    "coverage",
    "g_sol",
    "kl_divergence",
    "sample",
    "sample_batch",
    "utility",
    "GeoConfig",
    "GeoResult",
    "IterationRecord",
    "ValidityScreen",
    "elite_select",
    "geo_run",
    "iteration_temperature",
    "negative_separation_cost",
    "uniform_dense_mps",
    "vanilla_geo_run",
    "load_mps",
    "mps_from_bytes",
    "mps_to_bytes",
    "save_mps",
    "SolutionSet",
    "degeneracy_count",
    "enumerate_solutions",
    "random_valid_search",
    "solve_single_equality_dp",
    "solve_single_equality_mitm",
]

__version__ = "0.1.0"
