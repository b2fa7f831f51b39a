//! Permutation and pooled-bootstrap resampling of multi-sample empirical
//! processes.
//!
//! The crate is organised bottom-up:
//!
//! - [`stepfn`]: exact arithmetic on finite-jump step functions.
//! - [`empirical`]: multi-sample data, pooling, ECDFs and the at-risk /
//!   uncensored subdistribution processes of right-censored data.
//! - [`resampling`]: seeded permutation and pooled-bootstrap draws and the
//!   centered, `√N`-scaled resampling processes.
//! - [`functionals`]: Wilcoxon, Nelson-Aalen, product integral, Kaplan-Meier,
//!   RMST and quantile functionals together with their derivative operators.
//! - [`limits`]: closed-form limit covariance kernels of the resampling
//!   processes.
//! - [`analysis`]: descriptive per-group summaries used by the command line.
//! - [`verify`]: Monte Carlo and exhaustive-enumeration checks of the
//!   conditional limit results and the linearizations behind them.

pub mod analysis;
pub mod empirical;
pub mod error;
pub mod functionals;
pub mod laws;
pub mod limits;
pub mod resampling;
pub mod stepfn;
pub mod verify;

pub use error::{Error, Result};
pub use stepfn::{Convention, JumpAtZeroPolicy, StepFn};

/// Formats a real with the shortest representation that parses back to the
/// same `f64`.
pub fn fmt_real(x: f64) -> String {
    format!("{x:?}")
}
