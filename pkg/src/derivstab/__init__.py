"""Certified construction of generalized derivations from approximate maps.

Builds exact generalized derivations out of approximately multiplicative
maps on finite-dimensional complex normed algebras by dyadic extrapolation,
and certifies every claimed bound: the stability distance, the product
identities, star preservation, and superstability growth.
"""

from ._linalg import ConvergenceError
from .algebra import (
    AXIOM_TOL,
    SPECTRAL,
    WEIGHTED_L1,
    AlgebraDescriptor,
    AlgebraError,
    BimoduleDescriptor,
    Element,
    ModuleElement,
    act_left,
    act_right,
    add,
    adjoint,
    algebra_from_json,
    algebra_to_json,
    coords_from_pairs,
    coords_to_pairs,
    embed,
    make_matrix_algebra,
    make_self_bimodule,
    mul,
    norm,
    scale,
    sub,
    vector_norm,
)
from .control import (
    Constant,
    ControlError,
    ControlFunction,
    PhiTilde,
    Power,
    SeparablePowerSum,
    hyers_bound,
    partial_sum_bound,
    phi,
    phi_tilde,
    phi_tilde_series,
    tail_bound,
)
from .hyers import (
    J_COMMUTATION_TOL,
    AssembledMap,
    ExtrapolationTrace,
    HyersError,
    ScalarDecomposition,
    assemble_mu,
    default_depth,
    extract_delta_algebraic,
    extract_delta_limit,
    extrapolate_mu,
    identity_check_thresholds,
    scalar_decompose,
)
from .maps import (
    MAX_LOG2_SCALE,
    PAIR_TOL,
    SCALE_INVARIANT,
    SCALE_SENSITIVE,
    SLOTS,
    ApproximateMapPair,
    BoundedNoise,
    GeneralizedDerivationPair,
    LinearMap,
    MapError,
    PerturbationSpec,
    PowerNoise,
    ScaledModuleValue,
    SlotTargeted,
    Zero,
    algebraic_consistency_residuals,
    evaluate_f,
    evaluate_g,
    generalized_derivation_residuals,
    inner_generalized,
    leibniz_residuals,
    noise_envelope,
    right_multiplier,
    zero_pair,
)
from .verify import (
    BASIS_IDENTITY_TOL,
    CHECK_NAMES,
    GROWTH_SLOPE_MIN,
    MASTER_SLACK,
    ONE_AND_I,
    STAR_CONCLUSION_TOL,
    GrowthProfile,
    ResidualReport,
    SampleConfig,
    UnitaryDecomposition,
    VerifyError,
    certify_stability_bound,
    check_generalized_derivation,
    check_leibniz,
    check_star_preservation,
    full_t,
    master_inequality_lhs,
    residual_master_inequality,
    sample_elements,
    sample_unitaries,
    superstability_probe,
    unitary_decompose,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "AlgebraError", "ControlError", "ConvergenceError", "HyersError",
    "MapError", "VerifyError",
    # algebra
    "AXIOM_TOL", "SPECTRAL", "WEIGHTED_L1", "AlgebraDescriptor",
    "BimoduleDescriptor", "Element", "ModuleElement", "act_left", "act_right",
    "add", "adjoint", "algebra_from_json", "algebra_to_json",
    "coords_from_pairs", "coords_to_pairs", "embed", "make_matrix_algebra",
    "make_self_bimodule", "mul", "norm", "scale", "sub", "vector_norm",
    # control
    "Constant", "ControlFunction", "PhiTilde", "Power", "SeparablePowerSum",
    "hyers_bound", "partial_sum_bound", "phi", "phi_tilde", "phi_tilde_series",
    "tail_bound",
    # maps
    "MAX_LOG2_SCALE", "PAIR_TOL", "SCALE_INVARIANT", "SCALE_SENSITIVE",
    "SLOTS", "ApproximateMapPair", "BoundedNoise", "GeneralizedDerivationPair",
    "LinearMap", "PerturbationSpec", "PowerNoise", "ScaledModuleValue",
    "SlotTargeted", "Zero", "algebraic_consistency_residuals", "evaluate_f",
    "evaluate_g", "generalized_derivation_residuals", "inner_generalized",
    "leibniz_residuals", "noise_envelope", "right_multiplier", "zero_pair",
    # hyers
    "J_COMMUTATION_TOL", "AssembledMap", "ExtrapolationTrace",
    "ScalarDecomposition", "assemble_mu", "default_depth",
    "extract_delta_algebraic", "extract_delta_limit", "extrapolate_mu",
    "identity_check_thresholds", "scalar_decompose",
    # verify
    "BASIS_IDENTITY_TOL", "CHECK_NAMES", "GROWTH_SLOPE_MIN", "MASTER_SLACK",
    "ONE_AND_I", "STAR_CONCLUSION_TOL", "GrowthProfile", "ResidualReport",
    "SampleConfig", "UnitaryDecomposition", "certify_stability_bound",
    "check_generalized_derivation", "check_leibniz", "check_star_preservation",
    "full_t", "master_inequality_lhs", "residual_master_inequality",
    "sample_elements", "sample_unitaries", "superstability_probe",
    "unitary_decompose",
]
