"""Classification and grid certification of effectively hyperbolic
double characteristics of second order symbols -tau^2 + a(t, x, xi)."""

from hypcert.symbols import (
    CandidateFrame,
    DimensionMismatch,
    FrameReport,
    NotSingular,
    PhasePoint,
    PolySymbol,
    QuadraticJet,
    check_frame,
    gradient_at,
    hamilton_field,
    homogeneity_check,
    phase_variables,
    poisson_bracket,
    quadratic_jet,
)
from hypcert.spectral import (
    Classification,
    HamiltonMap,
    NoConvergence,
    Spectrum,
    block_char_factorization,
    chain_quadratic_jet,
    classify_effective_hyperbolicity,
    hamilton_map,
    psi_zero,
    psi_zero_sign_equivalence,
    spectrum,
)
from hypcert.normal_forms import (
    Cutoff,
    ExtendedQ,
    InvariantViolation,
    NormalFormSpec,
    SideConditionReport,
    Theta,
    build_cutoff,
    build_extended_Q,
    build_normal_form,
    check_side_conditions,
    validate_spec,
)
from hypcert.time_functions import (
    BbisViolated,
    SlackTooLarge,
    TimeFunctionCert,
    TimeFunctionCondition,
    WeightSelection,
    WeightsNotNormalized,
    alpha_coefficients,
    construct_time_function,
    epsilon_weights,
    time_function_condition,
)
from hypcert.verifier import (
    AllPointsDegenerate,
    CertificateReport,
    GlaeserReport,
    HessianDegenerate,
    MinimizeResult,
    NegativeInput,
    NonnegReport,
    RatioEstimate,
    Region,
    StructuralReport,
    certify_region,
    check_structural,
    estimate_c,
    estimate_kappa,
    glaeser_check,
    minimize_Q,
    minimize_Q_path,
    verify_nonnegativity,
)
from hypcert.symbolfile import (
    DimensionError,
    ParseError,
    SchemaError,
    SymbolFile,
    parse_symbol_data,
    parse_symbol_file,
    serialize_symbol_file,
)

__version__ = "0.1.0"

__all__ = [
    "AllPointsDegenerate",
    "BbisViolated",
    "CandidateFrame",
    "CertificateReport",
    "Classification",
    "Cutoff",
    "DimensionError",
    "DimensionMismatch",
    "ExtendedQ",
    "FrameReport",
    "GlaeserReport",
    "HamiltonMap",
    "HessianDegenerate",
    "InvariantViolation",
    "MinimizeResult",
    "NegativeInput",
    "NoConvergence",
    "NonnegReport",
    "NormalFormSpec",
    "NotSingular",
    "ParseError",
    "PhasePoint",
    "PolySymbol",
    "QuadraticJet",
    "RatioEstimate",
    "Region",
    "SchemaError",
    "SideConditionReport",
    "SlackTooLarge",
    "Spectrum",
    "StructuralReport",
    "SymbolFile",
    "Theta",
    "TimeFunctionCert",
    "TimeFunctionCondition",
    "WeightSelection",
    "WeightsNotNormalized",
    "alpha_coefficients",
    "block_char_factorization",
    "build_cutoff",
    "build_extended_Q",
    "build_normal_form",
    "certify_region",
    "chain_quadratic_jet",
    "check_frame",
    "check_side_conditions",
    "check_structural",
    "classify_effective_hyperbolicity",
    "construct_time_function",
    "epsilon_weights",
    "estimate_c",
    "estimate_kappa",
    "glaeser_check",
    "gradient_at",
    "hamilton_field",
    "hamilton_map",
    "homogeneity_check",
    "minimize_Q",
    "minimize_Q_path",
    "parse_symbol_data",
    "parse_symbol_file",
    "phase_variables",
    "poisson_bracket",
    "psi_zero",
    "psi_zero_sign_equivalence",
    "quadratic_jet",
    "serialize_symbol_file",
    "spectrum",
    "time_function_condition",
    "validate_spec",
    "verify_nonnegativity",
]
