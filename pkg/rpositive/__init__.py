"""
rpositive - R-positivity of nearest-neighbor matrices via allowed sequences.
"""

__version__ = "1.0.0"

# Model validation on import
from .model_loader import get_model_loader

# Perform startup validation
_model_loader = get_model_loader()
_validation_issues = _model_loader.validate_builtin_models()
if _validation_issues:
    import warnings
    warnings.warn(
        f"Bundled model validation issues detected: {', '.join(_validation_issues)}. "
        "Built-in models may not load.",
        UserWarning
    )

# Configuration
from .config import (
    RunConfig,
    set_max_workers,
    get_max_workers,
    reset_max_workers,
)

# Sequences and matrices
from .seqmodel import (
    ConstantTail,
    NoTail,
    RealSequence,
    PositiveSequence,
    NearestNeighborMatrix,
    SiteRewards,
    EdgeRewards,
    make_sequence,
    make_real_sequence,
    shift,
    matrix_from_product,
    matrix_from_edge_rewards,
    edge_rewards_from_matrix,
    alpha_from_bc,
)

# Continued fractions
from .contfrac import (
    phi,
    phi_inv,
    omega_trace,
    is_allowed,
    h_finite,
    h_truncations,
    h_limit,
    OmegaTrace,
    AllowedVerdict,
    VerdictKind,
    HLimit,
)

# Radius, gaps and classification
from .radius import (
    s_star,
    gap_scan,
    gap_lemma_check,
    classify,
    truncated_radius_oracle,
    oracle_table,
    diagonal_power_series,
    extend_to_gap,
    GapReport,
    Classification,
    Verdict,
    GibbsLabel,
)

# Birth-death chains
from .chain import (
    BirthDeathChain,
    build_chain,
    critical_chain,
    eigenvector_log,
    return_time_pmf,
    verify_excursion_identity,
    verify_scaling,
    exp_moment,
    stationary_distribution,
    escape_probability,
    simulate,
    Steps,
    ReturnsTo,
    MomentVerdict,
)

# Gibbs measures
from .gibbs import (
    TrajectoryBlock,
    Window,
    FiniteVolumeMeasure,
    make_block,
    visit_counts,
    edge_counts,
    hamiltonian_sites,
    hamiltonian_edges,
    finite_volume_prob,
    enumerate_measure,
    verify_site_edge_equivalence,
    hamiltonian_offsets,
    dump_distribution_csv,
)

# Models and reports
from .model_loader import (
    Model,
    load_model,
    load_builtin_model,
    list_builtin_models,
    resolve_model,
)
from .report_schema import (
    Report,
    ErrorReport,
    ReportMetadata,
    ReportVersion,
    ErrorCode,
    ExitCode,
    build_report,
    build_error_report,
    validate_report,
)
from .verify import run_property_suite

# Custom exceptions
from .exceptions import (
    RPositiveError,
    ValidationError,
    NumericError,
    UndeterminedError,
    NonPositiveEntry,
    ModelValidationError,
    NoTailUndetermined,
    EmptyLadder,
)

__all__ = [
    # Configuration
    "RunConfig",
    "set_max_workers",
    "get_max_workers",
    "reset_max_workers",
    # Sequences and matrices
    "ConstantTail",
    "NoTail",
    "RealSequence",
    "PositiveSequence",
    "NearestNeighborMatrix",
    "SiteRewards",
    "EdgeRewards",
    "make_sequence",
    "make_real_sequence",
    "shift",
    "matrix_from_product",
    "matrix_from_edge_rewards",
    "edge_rewards_from_matrix",
    "alpha_from_bc",
    # Continued fractions
    "phi",
    "phi_inv",
    "omega_trace",
    "is_allowed",
    "h_finite",
    "h_truncations",
    "h_limit",
    "OmegaTrace",
    "AllowedVerdict",
    "VerdictKind",
    "HLimit",
    # Radius
    "s_star",
    "gap_scan",
    "gap_lemma_check",
    "classify",
    "truncated_radius_oracle",
    "oracle_table",
    "diagonal_power_series",
    "extend_to_gap",
    "GapReport",
    "Classification",
    "Verdict",
    "GibbsLabel",
    # Chains
    "BirthDeathChain",
    "build_chain",
    "critical_chain",
    "eigenvector_log",
    "return_time_pmf",
    "verify_excursion_identity",
    "verify_scaling",
    "exp_moment",
    "stationary_distribution",
    "escape_probability",
    "simulate",
    "Steps",
    "ReturnsTo",
    "MomentVerdict",
    # Gibbs measures
    "TrajectoryBlock",
    "Window",
    "FiniteVolumeMeasure",
    "make_block",
    "visit_counts",
    "edge_counts",
    "hamiltonian_sites",
    "hamiltonian_edges",
    "finite_volume_prob",
    "enumerate_measure",
    "verify_site_edge_equivalence",
    "hamiltonian_offsets",
    "dump_distribution_csv",
    # Models and reports
    "Model",
    "load_model",
    "load_builtin_model",
    "list_builtin_models",
    "resolve_model",
    "Report",
    "ErrorReport",
    "ReportMetadata",
    "ReportVersion",
    "ErrorCode",
    "ExitCode",
    "build_report",
    "build_error_report",
    "validate_report",
    "run_property_suite",
    # Custom exceptions
    "RPositiveError",
    "ValidationError",
    "NumericError",
    "UndeterminedError",
    "NonPositiveEntry",
    "ModelValidationError",
    "NoTailUndetermined",
    "EmptyLadder",
]
