//! Difference-quotient checks of (uniform) Hadamard differentiability, the
//! inverse-map counterexample and the Duhamel identity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{
    prodint_derivative, product_integral, wilcoxon_curve, wilcoxon_derivative, PiecewiseLinear, ProdIntOptions,
};
use crate::stepfn::{affine_combine, merged_breakpoints, Convention, StepFn};

use super::stats::CompensatedSum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioFunctional {
    /// `(A, B) ↦ ∫ A dB` as a curve; points and directions have two components.
    Wilcoxon,
    /// `A ↦ ∏(1 + dA)` (open policy); one component.
    ProductIntegral,
}

impl RatioFunctional {
    pub fn components(self) -> usize {
        match self {
            RatioFunctional::Wilcoxon => 2,
            RatioFunctional::ProductIntegral => 1,
        }
    }

    fn value(self, x: &[StepFn]) -> Result<StepFn> {
        match self {
            RatioFunctional::Wilcoxon => wilcoxon_curve(&x[0], &x[1]),
            RatioFunctional::ProductIntegral => product_integral(&x[0], ProdIntOptions::open()),
        }
    }

    fn derivative(self, x: &[StepFn], h: &[StepFn]) -> Result<StepFn> {
        match self {
            RatioFunctional::Wilcoxon => wilcoxon_derivative(&x[0], &x[1], &h[0], &h[1]),
            RatioFunctional::ProductIntegral => prodint_derivative(&x[0], &h[0], ProdIntOptions::open()),
        }
    }
}

fn shifted(x: &[StepFn], t: f64, h: &[StepFn]) -> Result<Vec<StepFn>> {
    x.iter()
        .zip(h)
        .map(|(a, b)| affine_combine(&[1.0, t], &[a, b]))
        .collect()
}

/// `‖t_n⁻¹(φ(θ_n + t_n h_n) − φ(θ_n)) − φ'_θ(h)‖_sup` for each `n`.
pub fn hadamard_ratio_check(
    functional: RatioFunctional,
    theta_seq: &[Vec<StepFn>],
    h_seq: &[Vec<StepFn>],
    t_seq: &[f64],
    theta: &[StepFn],
    h: &[StepFn],
) -> Result<Vec<f64>> {
    let c = functional.components();
    if theta_seq.len() != h_seq.len() || theta_seq.len() != t_seq.len() {
        return Err(Error::Contract("sequence lengths differ".into()));
    }
    if theta.len() != c || h.len() != c || theta_seq.iter().chain(h_seq).any(|v| v.len() != c) {
        return Err(Error::Contract(format!("{functional:?} takes {c} components")));
    }
    let reference = functional.derivative(theta, h)?;
    theta_seq
        .iter()
        .zip(h_seq)
        .zip(t_seq)
        .enumerate()
        .map(|(n, ((th, hn), &t))| {
            let inner = || -> Result<f64> {
                if !(t > 0.0 && t.is_finite()) {
                    return Err(Error::Domain(format!("t_n must be positive, got {t}")));
                }
                let moved = functional.value(&shifted(th, t, hn)?)?;
                let base = functional.value(th)?;
                let quotient = affine_combine(&[1.0 / t, -1.0 / t], &[&moved, &base])?;
                Ok(affine_combine(&[1.0, -1.0], &[&quotient, &reference])?.sup_norm())
            };
            inner().map_err(|e| match e {
                Error::JumpTooClose { .. } => Error::Domain(format!("sequence index {n}: {e}")),
                other => other.context(format!("sequence index {n}")),
            })
        })
        .collect()
}

/// Built-in sequences `θ_n = θ + n^{-1/2} δ`, `h_n = h + n^{-1/2} η`, `t_n = n^{-1/2}`.
#[derive(Clone, Debug)]
pub struct RatioSequences {
    pub n_values: Vec<u64>,
    pub theta_seq: Vec<Vec<StepFn>>,
    pub h_seq: Vec<Vec<StepFn>>,
    pub t_seq: Vec<f64>,
    pub theta: Vec<StepFn>,
    pub h: Vec<StepFn>,
}

/// Default `n` values for ratio checks.
pub const DEFAULT_RATIO_N: [u64; 5] = [4, 16, 64, 256, 1024];

fn step(breaks: &[f64], jumps: &[f64], base: f64) -> Result<StepFn> {
    StepFn::from_jumps(0.0, 1.0, base, breaks.to_vec(), jumps, Convention::RightContinuous)
}

pub fn builtin_ratio_sequences(functional: RatioFunctional, n_values: &[u64]) -> Result<RatioSequences> {
    let (theta, delta, h, eta) = match functional {
        RatioFunctional::Wilcoxon => {
            let ka: Vec<f64> = (1..=10).map(|k| f64::from(k) / 10.0).collect();
            let kb: Vec<f64> = (1..=10).map(|k| (f64::from(k) - 0.5) / 10.0).collect();
            (
                vec![step(&ka, &[0.1; 10], 0.0)?, step(&kb, &[0.1; 10], 0.0)?],
                vec![
                    step(&[0.33, 0.77], &[0.3, -0.2], 0.0)?,
                    step(&[0.15, 0.62], &[-0.25, 0.4], 0.0)?,
                ],
                vec![
                    step(&[0.25, 0.6], &[0.5, -0.4], 0.0)?,
                    step(&[0.45, 0.9], &[-0.3, 0.6], 0.1)?,
                ],
                vec![step(&[0.12], &[0.7], 0.0)?, step(&[0.58, 0.81], &[0.2, -0.5], 0.0)?],
            )
        }
        RatioFunctional::ProductIntegral => {
            let ka: Vec<f64> = (1..=10).map(|k| f64::from(k) / 10.0).collect();
            let ja: Vec<f64> = (0..10).map(|k| [-0.3, 0.2, -0.1, 0.5][k % 4]).collect();
            (
                vec![step(&ka, &ja, 0.0)?],
                vec![step(&[0.35, 0.5, 0.8], &[0.4, -0.2, 0.3], 0.0)?],
                vec![step(&[0.2, 0.45, 0.7], &[1.0, -0.6, 0.5], 0.0)?],
                vec![step(&[0.3, 0.9], &[-0.4, 0.8], 0.0)?],
            )
        }
    };
    let mut seqs = RatioSequences {
        n_values: n_values.to_vec(),
        theta_seq: Vec::new(),
        h_seq: Vec::new(),
        t_seq: Vec::new(),
        theta,
        h,
    };
    for &n in n_values {
        if n == 0 {
            return Err(Error::Domain("n must be at least 1".into()));
        }
        let s = 1.0 / (n as f64).sqrt();
        seqs.theta_seq.push(shifted(&seqs.theta, s, &delta)?);
        seqs.h_seq.push(shifted(&seqs.h, s, &eta)?);
        seqs.t_seq.push(s);
    }
    Ok(seqs)
}

/// Runs [`hadamard_ratio_check`] on the built-in sequences.
pub fn builtin_ratio_check(functional: RatioFunctional, n_values: &[u64]) -> Result<Vec<f64>> {
    let s = builtin_ratio_sequences(functional, n_values)?;
    hadamard_ratio_check(functional, &s.theta_seq, &s.h_seq, &s.t_seq, &s.theta, &s.h)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleRow {
    pub n: u64,
    pub t_n: f64,
    /// `Φ_p(A_n)`.
    pub quantile: f64,
    /// `(Φ_p(A_n + t_n α) − Φ_p(A_n)) / t_n`.
    pub ratio: f64,
    /// `Φ'_{p,A}(α) = −α(ξ_p) / A'(ξ_p)`.
    pub derivative: f64,
    pub gap: f64,
}

/// `A_n − p` in coordinates centered at `ξ_p = 1` (`p = 1`, domain `[-1, 1]`).
fn counterexample_centered(n: u64) -> Result<PiecewiseLinear> {
    let s = 1.0 / (n as f64).sqrt();
    if s >= 1.0 {
        // A_1(x) = 2x − 1 on the whole of [0, 2].
        return PiecewiseLinear::from_parts(vec![-1.0, 1.0], vec![-2.0, 2.0], vec![2.0]);
    }
    PiecewiseLinear::from_parts(
        vec![-1.0, -s, s, 1.0],
        vec![-1.0 - s, -2.0 * s, 2.0 * s, 1.0 + s],
        vec![1.0, 2.0, 1.0],
    )
}

fn identity_centered() -> Result<PiecewiseLinear> {
    PiecewiseLinear::from_parts(vec![-1.0, 0.0, 1.0], vec![-1.0, 0.0, 1.0], vec![1.0, 1.0])
}

/// The inverse-map counterexample: `A(x) = x` on `[0, 2]`, `A_n` with slope 2
/// on `(1 − n^{-1/2}, 1 + n^{-1/2})`, `α ≡ 1`, `p = 1`, `t_n = n^{-1/2}`.
pub fn inverse_counterexample(n_values: &[u64]) -> Result<Vec<CounterexampleRow>> {
    let a = identity_centered()?;
    n_values
        .iter()
        .map(|&n| {
            if n == 0 {
                return Err(Error::Domain("n must be at least 1".into()));
            }
            let t = 1.0 / (n as f64).sqrt();
            let an = counterexample_centered(n)?;
            let xi_n = an.quantile(0.0)?;
            let moved = an.add_constant(t).quantile(0.0)?;
            let ratio = (moved - xi_n) / t;
            // α ≡ 1 and A'(ξ_p) = 1.
            let xi = a.quantile(0.0)?;
            let derivative = -1.0 / a.slope_at(xi)?;
            Ok(CounterexampleRow {
                n,
                t_n: t,
                quantile: 1.0 + xi_n,
                ratio,
                derivative,
                gap: (ratio - derivative).abs(),
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncrementFamily {
    /// The counterexample sequence `A_n`.
    Counterexample,
    /// `A_n ≡ A`.
    Identical,
}

/// `√n sup_{|x| ≤ K/√n} |A_n(ξ_p + x) − A_n(ξ_p) − A(ξ_p + x) + A(ξ_p)|`,
/// exact over the piecewise-linear structure.
pub fn increment_condition_probe(family: IncrementFamily, n: u64, k: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Domain(format!("K must be positive, got {k}")));
    }
    let a = identity_centered()?;
    let an = match family {
        IncrementFamily::Counterexample => counterexample_centered(n)?,
        IncrementFamily::Identical => a.clone(),
    };
    let diff = an.add_scaled(-1.0, &a)?;
    let diff = diff.add_constant(-diff.eval(0.0)?);
    let t = 1.0 / (n as f64).sqrt();
    Ok(diff.sup_abs_on(-k * t, k * t)? / t)
}

/// Maximum relative residual of the Duhamel identity
/// `φ(B)(t) − φ(A)(t) = φ(A)(t) Σ_{u ≤ t} φ(B)(u−) Δ(B − A)(u) / φ(A)(u)`
/// over all breakpoints `t`, open policy.
pub fn duhamel_residual(a: &StepFn, b: &StepFn) -> Result<f64> {
    let opts = ProdIntOptions::open();
    let pa = product_integral(a, opts)?;
    let pb = product_integral(b, opts)?;
    let diff = affine_combine(&[1.0, -1.0], &[b, a])?;
    let mut sum = CompensatedSum::default();
    let mut abs_sum = 0.0;
    let mut worst: f64 = 0.0;
    for t in merged_breakpoints([a, b]) {
        let jump = diff.eval(t)? - diff.left_limit(t)?;
        let pa_t = pa.eval(t)?;
        if pa_t == 0.0 {
            return Err(Error::Singularity {
                time: t,
                what: "product integral of A vanishes".into(),
            });
        }
        let term = pb.left_limit(t)? * jump / pa_t;
        sum.add(term);
        abs_sum += term.abs();
        let lhs = pb.eval(t)? - pa_t;
        let rhs = pa_t * sum.value();
        let scale = pa_t.abs().max(pb.eval(t)?.abs()).max(pa_t.abs() * abs_sum);
        if scale > 0.0 {
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    Ok(worst)
}
