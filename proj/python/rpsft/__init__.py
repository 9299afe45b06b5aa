"""Rotation-preserving fine-tuning toolkit."""

from ._rpsft import (
    ConfigError,
    Error,
    FormatError,
    IoError,
    NumericalError,
    ParameterError,
    ProtectedBasis,
    TrainingError,
    ValidationError,
    build_basis,
    closed_form_constant,
    cost_accounting,
    fisher_energy_curve,
    hidden_drift,
    integrate_flow,
    kde_bandwidth,
    load_checkpoint,
    mean_left_rotation,
    penalty,
    penalty_gradient,
    preset_names,
    principal_angles,
    protected_drift,
    rank_boundary,
    rank_from_energy,
    rotation_rankwise,
    run_preset,
    save_checkpoint,
    sequence_entropies,
    svd,
    threshold_decision,
    tradeoff_curves,
)

__version__ = "0.1.0"
