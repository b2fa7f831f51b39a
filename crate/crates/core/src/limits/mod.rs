//! Limit covariance kernels of the permutation and pooled-bootstrap
//! processes.
//!
//! A kernel is `coefficient(i, j) × base(s, t)`, where the coefficient is
//! `λ_i⁻¹ 1{i=j} − 1` for permutations and `λ_i⁻¹ 1{i=j}` for the pooled
//! bootstrap, and the base depends on the statistic:
//!
//! | statistic | base |
//! |-----------|------|
//! | indicators `1{X ≤ s}` | `H(min) − H(s)H(t)` |
//! | Nelson-Aalen | `C(min)` |
//! | Kaplan-Meier | `S(s)S(t) ∫_[0,min] 1/((1 − ΔΛ)H̄) dΛ` |
//! | `(H̄, H^uc)` pair | 2×2 block, see [`survival_cross_kernel`] |
//!
//! Populations are either plug-in step functions or analytic laws; kernels
//! only see them through [`PooledPopulation`] and [`SurvivalSource`].
//! The bootstrap `(H̄, H^uc)` block reuses the permutation block with the
//! bootstrap coefficient.

mod population;
mod quadrature;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::empirical::LambdaVector;
use crate::error::{Error, Result};

pub use population::{AnalyticSurvival, EmpiricalSurvival, PlainSource, PooledPopulation, SurvivalSource};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Perm,
    Boot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    PermIndicator,
    BootIndicator,
    PermSurvivalNa,
    BootSurvivalNa,
    PermKm,
    BootKm,
    SurvivalCross,
    BootSurvivalCross,
}

impl KernelKind {
    pub fn variant(self) -> Variant {
        match self {
            KernelKind::PermIndicator | KernelKind::PermSurvivalNa | KernelKind::PermKm | KernelKind::SurvivalCross => {
                Variant::Perm
            }
            _ => Variant::Boot,
        }
    }

    /// Number of process components per group.
    pub fn components(self) -> usize {
        match self {
            KernelKind::SurvivalCross | KernelKind::BootSurvivalCross => 2,
            _ => 1,
        }
    }
}

fn check_groups(lambdas: &LambdaVector, i: usize, j: usize) -> Result<()> {
    if i >= lambdas.len() || j >= lambdas.len() {
        return Err(Error::Contract(format!(
            "group index ({i}, {j}) out of range for {} groups",
            lambdas.len()
        )));
    }
    Ok(())
}

/// `λ_i⁻¹ 1{i=j} − 1`.
pub fn perm_coeff(lambdas: &LambdaVector, i: usize, j: usize) -> Result<f64> {
    check_groups(lambdas, i, j)?;
    Ok(if i == j { 1.0 / lambdas.get(i) - 1.0 } else { -1.0 })
}

/// `λ_i⁻¹ 1{i=j}`.
pub fn boot_coeff(lambdas: &LambdaVector, i: usize, j: usize) -> Result<f64> {
    check_groups(lambdas, i, j)?;
    Ok(if i == j { 1.0 / lambdas.get(i) } else { 0.0 })
}

pub fn coeff(variant: Variant, lambdas: &LambdaVector, i: usize, j: usize) -> Result<f64> {
    match variant {
        Variant::Perm => perm_coeff(lambdas, i, j),
        Variant::Boot => boot_coeff(lambdas, i, j),
    }
}

/// `H(min{s,t}) − H(s)H(t)`.
pub fn bb_cov(pop: &PooledPopulation, s: f64, t: f64) -> Result<f64> {
    let (hs, ht) = (pop.cdf(s)?, pop.cdf(t)?);
    Ok(pop.cdf(s.min(t))? - hs * ht)
}

pub fn indicator_kernel(variant: Variant, pop: &PooledPopulation, i: usize, j: usize, s: f64, t: f64) -> Result<f64> {
    let c = coeff(variant, &pop.lambdas, i, j)?;
    if c == 0.0 {
        return Ok(0.0);
    }
    Ok(c * bb_cov(pop, s, t)?)
}

pub fn c_function(pop: &PooledPopulation, t: f64) -> Result<f64> {
    pop.survival_source()?.c_function(t)
}

/// `coeff(i, j) · C(min{s,t})`.
pub fn na_kernel(variant: Variant, pop: &PooledPopulation, i: usize, j: usize, s: f64, t: f64) -> Result<f64> {
    let c = coeff(variant, &pop.lambdas, i, j)?;
    let base = c_function(pop, s.min(t))?;
    Ok(if c == 0.0 { 0.0 } else { c * base })
}

/// `coeff(i, j) · S(s)S(t) ∫_[0,min{s,t}] 1/((1 − ΔΛ)H̄) dΛ`.
pub fn km_kernel(variant: Variant, pop: &PooledPopulation, i: usize, j: usize, s: f64, t: f64) -> Result<f64> {
    let c = coeff(variant, &pop.lambdas, i, j)?;
    let src = pop.survival_source()?;
    let base = src.survival(s)? * src.survival(t)? * src.km_integral(s.min(t))?;
    Ok(if c == 0.0 { 0.0 } else { c * base })
}

/// Covariance block of `(Ḡ_i(s), G^uc_i(s))` with `(Ḡ_j(t), G^uc_j(t))`:
///
/// - `[0][0] = H̄(max) − H̄(s)H̄(t)`
/// - `[0][1] = (H^uc(t) − H^uc(s−))1{s ≤ t} − H^uc(t)H̄(s)`
/// - `[1][0] = (H^uc(s) − H^uc(t−))1{t ≤ s} − H^uc(s)H̄(t)`
/// - `[1][1] = H^uc(min) − H^uc(s)H^uc(t)`
///
/// each multiplied by the coefficient.
pub fn survival_cross_kernel(
    variant: Variant,
    pop: &PooledPopulation,
    i: usize,
    j: usize,
    s: f64,
    t: f64,
) -> Result<[[f64; 2]; 2]> {
    let c = coeff(variant, &pop.lambdas, i, j)?;
    let src = pop.survival_source()?;
    let (rs, rt) = (src.at_risk(s)?, src.at_risk(t)?);
    let (us, ut) = (src.uncensored(s)?, src.uncensored(t)?);
    let rr = src.at_risk(s.max(t))? - rs * rt;
    let ur = if s <= t { ut - src.uncensored_left(s)? } else { 0.0 } - ut * rs;
    let ru = if t <= s { us - src.uncensored_left(t)? } else { 0.0 } - us * rt;
    let uu = src.uncensored(s.min(t))? - us * ut;
    let scale = |v: f64| if c == 0.0 { 0.0 } else { c * v };
    Ok([[scale(rr), scale(ur)], [scale(ru), scale(uu)]])
}

/// Scalar kernel value for the one-component kinds.
pub fn kernel_value(kind: KernelKind, pop: &PooledPopulation, i: usize, j: usize, s: f64, t: f64) -> Result<f64> {
    let v = kind.variant();
    match kind {
        KernelKind::PermIndicator | KernelKind::BootIndicator => indicator_kernel(v, pop, i, j, s, t),
        KernelKind::PermSurvivalNa | KernelKind::BootSurvivalNa => na_kernel(v, pop, i, j, s, t),
        KernelKind::PermKm | KernelKind::BootKm => km_kernel(v, pop, i, j, s, t),
        KernelKind::SurvivalCross | KernelKind::BootSurvivalCross => Err(Error::Contract(
            "cross kernel is a 2x2 block; use survival_cross_kernel".into(),
        )),
    }
}

/// Row/column index of `(group, component, grid point)` in an assembled
/// matrix: `(group · components + component) · |grid| + point`.
pub fn cell_index(kind: KernelKind, grid_len: usize, group: usize, component: usize, point: usize) -> usize {
    (group * kind.components() + component) * grid_len + point
}

/// Assembles the full covariance matrix over groups × components × grid.
pub fn assemble(kind: KernelKind, pop: &PooledPopulation, grid: &[f64]) -> Result<DMatrix<f64>> {
    let m = pop.num_groups();
    let g = grid.len();
    let comps = kind.components();
    let dim = m * comps * g;
    let rows: Vec<Vec<f64>> = (0..dim)
        .into_par_iter()
        .map(|r| {
            let (i, rest) = (r / (comps * g), r % (comps * g));
            let (ci, a) = (rest / g, rest % g);
            (0..dim)
                .map(|c| {
                    let (j, rest) = (c / (comps * g), c % (comps * g));
                    let (cj, b) = (rest / g, rest % g);
                    if comps == 1 {
                        kernel_value(kind, pop, i, j, grid[a], grid[b])
                    } else {
                        Ok(survival_cross_kernel(kind.variant(), pop, i, j, grid[a], grid[b])?[ci][cj])
                    }
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(dim, dim, |r, c| rows[r][c]))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(matrix: &DMatrix<f64>) -> f64 {
    if matrix.nrows() == 0 {
        return 0.0;
    }
    matrix
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}
