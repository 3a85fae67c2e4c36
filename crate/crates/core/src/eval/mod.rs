//! Calibration metrics, system evaluation, robustness and threshold sweeps.

pub mod metrics;
pub mod profile;
pub mod robust;
pub mod system;

pub use metrics::{
    event_metrics, metrics, metrics_binned, pooled_accuracy, predictive_entropy, CalibrationReport, Metrics, ECE_BINS,
    NLL_CLAMP,
};
pub use profile::{exit_profile, parse_tau_grid, ExitProfile, ProfileRow};
pub use robust::{corrupt_samples, robustness_eval, RobustnessLevel, RobustnessReport};
pub use system::{evaluate_system, System, SystemEval, SystemKind, SystemReport};
