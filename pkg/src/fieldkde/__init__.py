"""Simulation lab for kernel density estimation on causal linear random fields."""

__version__ = "0.1.0"

from .coefficients import (
    CoefficientModel,
    ConditionReport,
    TailFunctionals,
    ToleranceError,
    check_condition_c,
    check_decay_window,
    check_hallin,
    check_machkouri_qsum,
    tail_functionals,
)
from .innovations import InnovationModel, SeedSpec, innovation_density, innovation_stream
from .field import (
    CoupledFields,
    FieldSizeError,
    LatticeField,
    TruncationPlan,
    field_moment_diagnostics,
    generate_coupled_fields,
    lattice_convolve,
    plan_truncation,
)
from .kde import (
    BandwidthSchedule,
    DensityOracle,
    KernelModel,
    OracleError,
    asymptotic_variance,
    density_oracle,
    expected_kde,
    kde_estimate,
    kernel_by_name,
)
from .clt import (
    BlockPlan,
    CltReport,
    ExperimentConfig,
    KsResult,
    MomentError,
    block_decomposition_check,
    fixed_m_gap,
    ks_normality_test,
    lindeberg_estimate,
    m_schedule,
    normalized_statistic,
    rectangle_moment_check,
    run_clt_experiment,
    wu_inequality_check,
)

__all__ = [
    "__version__",
    "CoefficientModel",
    "ConditionReport",
    "TailFunctionals",
    "ToleranceError",
    "check_condition_c",
    "check_decay_window",
    "check_hallin",
    "check_machkouri_qsum",
    "tail_functionals",
    "InnovationModel",
    "SeedSpec",
    "innovation_density",
    "innovation_stream",
    "CoupledFields",
    "FieldSizeError",
    "LatticeField",
    "TruncationPlan",
    "field_moment_diagnostics",
    "generate_coupled_fields",
    "lattice_convolve",
    "plan_truncation",
    "BandwidthSchedule",
    "DensityOracle",
    "KernelModel",
    "OracleError",
    "asymptotic_variance",
    "density_oracle",
    "expected_kde",
    "kde_estimate",
    "kernel_by_name",
    "BlockPlan",
    "CltReport",
    "ExperimentConfig",
    "KsResult",
    "MomentError",
    "block_decomposition_check",
    "fixed_m_gap",
    "ks_normality_test",
    "lindeberg_estimate",
    "m_schedule",
    "normalized_statistic",
    "rectangle_moment_check",
    "run_clt_experiment",
    "wu_inequality_check",
]
