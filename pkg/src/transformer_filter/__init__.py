"""Softmax self-attention filters and controllers with tracking certificates.

A fixed (not learned) attention block over a sliding window of its own
one-step predictions provably tracks the optimal linear filter — and, closed
through state feedback, the LQG controller — to any accuracy set by the
softmax temperature.  This package builds those objects, synthesizes the
reference gains, computes certified temperatures, and ships the paired
simulations and checks that exercise every claim numerically.
"""

from .attention import (
    AttentionParams,
    KernelSpec,
    attention_forward,
    build_attention_matrix,
    build_output_matrix,
    embed_phi,
    embedding_dim,
    kernel_attention_params,
    nadaraya_watson,
    softmax_weights,
    windowed_forward,
)
from .config import ConfigError, ExperimentConfig, load_config
from .control import (
    ControlConfig,
    closed_loop_sim,
    control_maps,
    control_state,
    decompose_disturbances,
    empirical_cost,
    lqg_step,
    tf_control_step,
    weak_stability_check,
)
from .filtering import (
    FilterConfig,
    FilterState,
    filter_maps,
    interpolant_gap_bound,
    kalman_step,
    run_filter_comparison,
    simulate_plant,
    tf_intermediate,
    tf_step,
    tf_weights,
    weighted_distance_curve,
)
from .linalg import (
    NotStableError,
    StableFactorization,
    solve_discrete_lyapunov,
    spectral_norm,
    spectral_radius,
    stable_factorization,
)
from .noise import GENERATOR_ID, DisturbanceSource, NoiseSpec
from .presets import PRESET_NAMES, get_preset
from .records import ClosedLoopRecord, TrajectoryRecord, read_csv, write_csv
from .synthesis import (
    DareDivergenceError,
    beta_for_control,
    beta_for_filter,
    build_stacked_transition,
    control_coupling_constant,
    dare_residual,
    kalman_gain,
    lqr_gain,
    solve_dare,
    stacked_similarity_residual,
    synthesize_gains,
)
from .systems import (
    CostWeights,
    GainSet,
    LinearSystem,
    assert_stabilizing,
    check_controllability,
    check_observability,
    random_stable_matrix,
    random_system,
    user_gains,
)
from .verify import CheckResult, run_verification

__version__ = "0.1.0"

__all__ = [
    "AttentionParams", "KernelSpec", "attention_forward", "build_attention_matrix",
    "build_output_matrix", "embed_phi", "embedding_dim", "kernel_attention_params",
    "nadaraya_watson", "softmax_weights", "windowed_forward",
    "ConfigError", "ExperimentConfig", "load_config",
    "ControlConfig", "closed_loop_sim", "control_maps", "control_state",
    "decompose_disturbances", "empirical_cost", "lqg_step", "tf_control_step",
    "weak_stability_check",
    "FilterConfig", "FilterState", "filter_maps", "interpolant_gap_bound",
    "kalman_step", "run_filter_comparison", "simulate_plant", "tf_intermediate",
    "tf_step", "tf_weights", "weighted_distance_curve",
    "NotStableError", "StableFactorization", "solve_discrete_lyapunov",
    "spectral_norm", "spectral_radius", "stable_factorization",
    "GENERATOR_ID", "DisturbanceSource", "NoiseSpec",
    "PRESET_NAMES", "get_preset",
    "ClosedLoopRecord", "TrajectoryRecord", "read_csv", "write_csv",
    "DareDivergenceError", "beta_for_control", "beta_for_filter",
    "build_stacked_transition", "control_coupling_constant", "dare_residual",
    "kalman_gain", "lqr_gain", "solve_dare", "stacked_similarity_residual",
    "synthesize_gains",
    "CostWeights", "GainSet", "LinearSystem", "assert_stabilizing",
    "check_controllability", "check_observability", "random_stable_matrix",
    "random_system", "user_gains",
    "CheckResult", "run_verification",
    "__version__",
]
