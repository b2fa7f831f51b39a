//! Nelson-Aalen, product integral, Kaplan-Meier and RMST.
//!
//! Survival integrals run over `[0, t]` and pick up the value at `0` as a
//! jump. The product integral additionally supports `(a, t]` for general
//! step functions.

use serde::{Deserialize, Serialize};

use crate::empirical::{at_risk_process, uncensored_subdist, CensoredObs};
use crate::error::{Error, Result};
use crate::stepfn::{affine_combine, merged_breakpoints, stieltjes_curve, Convention, JumpAtZeroPolicy, StepFn};

use super::same_domain;

/// At-risk process `H̄` (left-continuous) and uncensored subdistribution
/// `H^uc` (right-continuous), both starting at `0`, with horizon `τ`.
///
/// Monotonicity is not enforced so that perturbed bundles `H̄ + tα` can be
/// fed to the functionals.
#[derive(Clone, Debug, PartialEq)]
pub struct HazardBundle {
    pub at_risk: StepFn,
    pub uncensored: StepFn,
    pub tau: f64,
}

impl HazardBundle {
    pub fn new(at_risk: StepFn, uncensored: StepFn, tau: f64) -> Result<HazardBundle> {
        if at_risk.convention() != Convention::LeftContinuous {
            return Err(Error::Contract("at-risk process must be left-continuous".into()));
        }
        if uncensored.convention() != Convention::RightContinuous {
            return Err(Error::Contract(
                "uncensored subdistribution must be right-continuous".into(),
            ));
        }
        if at_risk.lo() != 0.0 || uncensored.lo() != 0.0 {
            return Err(Error::Contract("hazard bundle functions must start at 0".into()));
        }
        if !(tau > 0.0 && tau <= at_risk.hi() && tau <= uncensored.hi()) {
            return Err(Error::Domain(format!("tau = {tau} outside the bundle domain")));
        }
        Ok(HazardBundle {
            at_risk,
            uncensored,
            tau,
        })
    }

    pub fn from_sample(sample: &[CensoredObs], tau: f64) -> Result<HazardBundle> {
        HazardBundle::new(at_risk_process(sample)?, uncensored_subdist(sample)?, tau)
    }

    fn at_risk_at(&self, u: f64) -> Result<f64> {
        let r = self.at_risk.eval(u)?;
        if r == 0.0 {
            return Err(Error::Singularity {
                time: u,
                what: "at-risk process is zero".into(),
            });
        }
        Ok(r)
    }
}

/// `Λ(t) = ∫_[0,t] (1/H̄) dH^uc` on `[0, τ]`. The reciprocal is never
/// formed; each jump of `H^uc` is divided by `H̄` at that time.
pub fn nelson_aalen(bundle: &HazardBundle) -> Result<StepFn> {
    let huc = bundle.uncensored.restrict(bundle.tau)?;
    stieltjes_curve(&huc, JumpAtZeroPolicy::CLOSED, |u, d| {
        if d == 0.0 {
            return Ok(0.0);
        }
        let r = bundle.at_risk_at(u)?;
        // A jump of H^uc is a difference of two rounded levels; when every
        // subject at risk has an event the ratio must be exactly 1.
        let scale = bundle.uncensored.eval(u)?.abs().max(r.abs());
        if (d - r).abs() <= 4.0 * f64::EPSILON * scale {
            return Ok(1.0);
        }
        Ok(d / r)
    })
}

/// Chain-rule derivative `(α, β) ↦ ∫_[0,·] (1/H̄) dβ − ∫_[0,·] (α/H̄²) dH^uc`.
pub fn nelson_aalen_derivative(bundle: &HazardBundle, alpha: &StepFn, beta: &StepFn) -> Result<StepFn> {
    if alpha.convention() != Convention::LeftContinuous || beta.convention() != Convention::RightContinuous {
        return Err(Error::Contract(
            "Nelson-Aalen directions are (left-continuous, right-continuous)".into(),
        ));
    }
    same_domain(&[&bundle.at_risk, alpha])?;
    same_domain(&[&bundle.uncensored, beta])?;
    let tau = bundle.tau;
    let from_beta = stieltjes_curve(&beta.restrict(tau)?, JumpAtZeroPolicy::CLOSED, |u, d| {
        if d == 0.0 {
            return Ok(0.0);
        }
        Ok(d / bundle.at_risk_at(u)?)
    })?;
    let huc = bundle.uncensored.restrict(tau)?;
    let from_alpha = stieltjes_curve(&huc, JumpAtZeroPolicy::CLOSED, |u, d| {
        if d == 0.0 {
            return Ok(0.0);
        }
        let r = bundle.at_risk_at(u)?;
        Ok(-alpha.eval(u)? * d / (r * r))
    })?;
    affine_combine(&[1.0, 1.0], &[&from_beta, &from_alpha])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProdIntOptions {
    pub policy: JumpAtZeroPolicy,
    /// Jumps must satisfy `1 + ΔA > eps_jump`. With `eps_jump = 0` a jump of
    /// exactly `-1` is accepted, so a survival curve may reach zero.
    pub eps_jump: f64,
}

impl ProdIntOptions {
    pub fn open() -> ProdIntOptions {
        ProdIntOptions {
            policy: JumpAtZeroPolicy::OPEN,
            eps_jump: 0.0,
        }
    }

    pub fn closed() -> ProdIntOptions {
        ProdIntOptions {
            policy: JumpAtZeroPolicy::CLOSED,
            eps_jump: 0.0,
        }
    }

    /// Returns the factor `1 + jump`, rejecting it when it is below the
    /// configured margin.
    fn factor(&self, time: f64, jump: f64, scale: f64) -> Result<f64> {
        let margin = one_plus(jump, scale);
        if margin < 0.0 || (self.eps_jump > 0.0 && margin <= self.eps_jump) {
            return Err(Error::JumpTooClose { time, jump });
        }
        Ok(margin)
    }
}

/// `1 + jump`, with results within rounding distance of zero set to zero.
/// Jumps are differences of stored levels of magnitude up to `scale`, so a
/// mathematically exact jump of `-1` can come out a few ulps away.
fn one_plus(jump: f64, scale: f64) -> f64 {
    let v = 1.0 + jump;
    if v.abs() <= 4.0 * f64::EPSILON * scale.abs().max(1.0) {
        0.0
    } else {
        v
    }
}

fn level_scale(a: &StepFn, k: usize) -> f64 {
    a.level_before(k).abs().max(a.levels()[k].abs())
}

/// `(1 + ΔA(u_k), ΔA(u_k))` for the k-th breakpoint of `a`.
fn factor_at(a: &StepFn, k: usize) -> (f64, f64) {
    let d = a.jump(k);
    (one_plus(d, level_scale(a, k)), d)
}

impl Default for ProdIntOptions {
    fn default() -> Self {
        ProdIntOptions::open()
    }
}

fn check_right(f: &StepFn, what: &str) -> Result<()> {
    if f.convention() != Convention::RightContinuous {
        return Err(Error::Contract(format!("{what} must be right-continuous")));
    }
    Ok(())
}

/// `φ(A)(t) = ∏_{u ≤ t} (1 + ΔA(u))`.
pub fn product_integral(a: &StepFn, opts: ProdIntOptions) -> Result<StepFn> {
    check_right(a, "product-integral argument")?;
    let base = if opts.policy.applies_to(a) {
        opts.factor(0.0, a.base(), a.base())?
    } else {
        1.0
    };
    let mut acc = base;
    let mut levels = Vec::with_capacity(a.len());
    for (k, &u) in a.breakpoints().iter().enumerate() {
        acc *= opts.factor(u, a.jump(k), level_scale(a, k))?;
        levels.push(acc);
    }
    StepFn::from_levels(
        a.lo(),
        a.hi(),
        base,
        a.breakpoints().to_vec(),
        levels,
        Convention::RightContinuous,
    )
}

fn derivative_denominator(u: f64, den: f64) -> Result<f64> {
    if den == 0.0 {
        return Err(Error::Singularity {
            time: u,
            what: "jump of -1 in product-integral derivative".into(),
        });
    }
    Ok(den)
}

/// `φ'_A(α) = φ(A)(·) (α(·) − α(a) − Σ_{u ≤ ·} ΔA(u) Δα(u) / (1 + ΔA(u)))`,
/// one pass over the merged breakpoints. Under the closed policy the sum
/// includes `u = 0` with `ΔA(0) = A(0)`, `Δα(0) = α(0)` and `α(a)` drops out.
pub fn prodint_derivative(a: &StepFn, alpha: &StepFn, opts: ProdIntOptions) -> Result<StepFn> {
    check_right(a, "product-integral argument")?;
    check_right(alpha, "product-integral direction")?;
    same_domain(&[a, alpha])?;
    let phi = product_integral(a, opts)?;
    let closed = opts.policy.applies_to(a);
    let mut correction = 0.0;
    let anchor = if closed {
        let den = derivative_denominator(0.0, one_plus(a.base(), a.base()))?;
        correction += a.base() * alpha.base() / den;
        0.0
    } else {
        alpha.base()
    };
    let base = phi.base() * (alpha.base() - anchor - correction);

    let breaks = merged_breakpoints([a, alpha]);
    let (mut ka, mut kal) = (0usize, 0usize);
    let mut levels = Vec::with_capacity(breaks.len());
    for &u in &breaks {
        let (da, den) = if a.breakpoints().get(ka) == Some(&u) {
            ka += 1;
            let (den, d) = factor_at(a, ka - 1);
            (d, derivative_denominator(u, den)?)
        } else {
            (0.0, 1.0)
        };
        let dal = if alpha.breakpoints().get(kal) == Some(&u) {
            kal += 1;
            alpha.jump(kal - 1)
        } else {
            0.0
        };
        if da != 0.0 && dal != 0.0 {
            correction += da * dal / den;
        }
        levels.push(phi.level_at_or_after(u) * (alpha.level_at_or_after(u) - anchor - correction));
    }
    StepFn::from_levels(a.lo(), a.hi(), base, breaks, levels, Convention::RightContinuous)
}

/// `Ŝ = ∏_[0,·] (1 − dΛ)` with `Λ` the Nelson-Aalen estimate of the bundle.
pub fn kaplan_meier(bundle: &HazardBundle) -> Result<StepFn> {
    product_integral(&nelson_aalen(bundle)?.scale(-1.0), ProdIntOptions::closed())
}

/// Derivative of the Kaplan-Meier map `(H̄, H^uc) ↦ φ(−Λ)` in direction `(α, β)`.
pub fn kaplan_meier_derivative(bundle: &HazardBundle, alpha: &StepFn, beta: &StepFn) -> Result<StepFn> {
    let minus_lambda = nelson_aalen(bundle)?.scale(-1.0);
    let inner = nelson_aalen_derivative(bundle, alpha, beta)?.scale(-1.0);
    prodint_derivative(&minus_lambda, &inner, ProdIntOptions::closed())
}

/// `∫_lo^τ S(t) dt`, exact for a step function.
pub fn rmst(s: &StepFn, tau: f64) -> Result<f64> {
    if !s.lo().is_finite() || !(s.lo() < tau && tau <= s.hi()) {
        return Err(Error::Domain(format!(
            "RMST horizon {tau} outside ({}, {}] or infinite lower end",
            s.lo(),
            s.hi()
        )));
    }
    let mut area = 0.0;
    let mut left = s.lo();
    let mut level = s.base();
    for (&b, &next) in s.breakpoints().iter().zip(s.levels()) {
        if b >= tau {
            break;
        }
        area += level * (b - left);
        left = b;
        level = next;
    }
    Ok(area + level * (tau - left))
}
