//! Differentiable functionals of step functions and their derivative maps.
//!
//! Each functional comes with the linear operator that approximates its
//! increments. The verification harness compares the two through difference
//! quotients and linearization residuals.

mod hazard;
mod quantile;
mod wilcoxon;

pub use hazard::{
    kaplan_meier, kaplan_meier_derivative, nelson_aalen, nelson_aalen_derivative, prodint_derivative, product_integral,
    rmst, HazardBundle, ProdIntOptions,
};
pub use quantile::{inverse_derivative, quantile, quantile_derivative, PiecewiseLinear, QuantileProblem};
pub use wilcoxon::{wilcoxon, wilcoxon_curve, wilcoxon_derivative};

use crate::error::{Error, Result};
use crate::stepfn::StepFn;

pub(crate) fn same_domain(fns: &[&StepFn]) -> Result<()> {
    let first = fns[0];
    for f in &fns[1..] {
        if f.lo() != first.lo() || f.hi() != first.hi() {
            return Err(Error::Contract(format!(
                "domain mismatch: [{}, {}] vs [{}, {}]",
                f.lo(),
                f.hi(),
                first.lo(),
                first.hi()
            )));
        }
    }
    Ok(())
}
