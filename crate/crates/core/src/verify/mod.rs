//! Verification harness: Monte Carlo and exhaustive checks of conditional
//! covariance limits, linearization residuals, difference-quotient
//! convergence and Gaussian simulation of limit processes.

pub mod config;
mod experiment;
pub mod gaussian;
pub mod hadamard;
mod scenario;
pub mod stats;

pub use config::{ExperimentConfig, GridSpec, ResampleChoice, Scenario, Target, TauSpec, ToleranceSpec};
pub use experiment::{
    conditional_cov_experiment, exhaustive_group_means, group_ecdf_moments, kernel_report,
    linearization_residual_experiment, scaled_sizes, simulate_dataset, statistic_moments, KernelMatrix, KernelReport,
    KindReport, LadderEntry, LinearizationReport, VerifyReport,
};
pub use gaussian::{gaussian_calibration, simulate_grid_gaussian, GaussianSampler};
pub use hadamard::{
    builtin_ratio_check, builtin_ratio_sequences, duhamel_residual, hadamard_ratio_check, increment_condition_probe,
    inverse_counterexample, CounterexampleRow, IncrementFamily, RatioFunctional, RatioSequences, DEFAULT_RATIO_N,
};
pub use stats::{CellResult, Moments};
