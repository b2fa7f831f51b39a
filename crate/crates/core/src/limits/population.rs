use std::fmt::Debug;

use crate::empirical::LambdaVector;
use crate::error::{Error, Result};
use crate::functionals::{kaplan_meier, nelson_aalen, HazardBundle};
use crate::laws::Law;
use crate::stepfn::{stieltjes_curve, JumpAtZeroPolicy, StepFn};

use super::quadrature::integrate;

const QUAD_TOL: f64 = 1e-12;

/// Pooled distribution function `H`, either a step-function plug-in or the
/// λ-mixture of analytic laws.
#[derive(Clone, Debug, PartialEq)]
pub enum PlainSource {
    Empirical(StepFn),
    Mixture(Vec<Law>),
}

/// Survival quantities of the pooled population on `[0, τ]`.
pub trait SurvivalSource: Debug + Send + Sync {
    fn tau(&self) -> f64;
    /// `H̄(t)`, the probability of being at risk at `t`.
    fn at_risk(&self, t: f64) -> Result<f64>;
    fn uncensored(&self, t: f64) -> Result<f64>;
    /// `H^uc(t−)`.
    fn uncensored_left(&self, t: f64) -> Result<f64>;
    fn cumulative_hazard(&self, t: f64) -> Result<f64>;
    /// `C(t) = ∫_[0,t] (1 − ΔΛ)/H̄ dΛ`.
    fn c_function(&self, t: f64) -> Result<f64>;
    /// `∫_[0,t] 1/((1 − ΔΛ) H̄) dΛ`.
    fn km_integral(&self, t: f64) -> Result<f64>;
    fn survival(&self, t: f64) -> Result<f64>;
}

fn check_time(t: f64, tau: f64) -> Result<()> {
    if !(0.0..=tau).contains(&t) {
        return Err(Error::Domain(format!("time {t} outside [0, {tau}]")));
    }
    Ok(())
}

/// Plug-in quantities from a pooled hazard bundle, summed exactly.
#[derive(Clone, Debug)]
pub struct EmpiricalSurvival {
    bundle: HazardBundle,
    cum_hazard: StepFn,
    c_curve: StepFn,
    km_curve: StepFn,
    km_singular_from: Option<f64>,
    survival: StepFn,
}

impl EmpiricalSurvival {
    pub fn new(bundle: HazardBundle) -> Result<EmpiricalSurvival> {
        let cum_hazard = nelson_aalen(&bundle)?;
        let hbar = |u: f64| bundle.at_risk.eval(u);
        let c_curve = stieltjes_curve(&cum_hazard, JumpAtZeroPolicy::CLOSED, |u, d| {
            if d == 0.0 {
                return Ok(0.0);
            }
            Ok((1.0 - d) * d / hbar(u)?)
        })?;
        let mut km_singular_from = None;
        let km_curve = stieltjes_curve(&cum_hazard, JumpAtZeroPolicy::CLOSED, |u, d| {
            if d == 0.0 || km_singular_from.is_some() {
                return Ok(0.0);
            }
            let rest = 1.0 - d;
            if rest.abs() <= 4.0 * f64::EPSILON * d.abs().max(1.0) {
                km_singular_from = Some(u);
                return Ok(0.0);
            }
            Ok(d / (rest * hbar(u)?))
        })?;
        let survival = kaplan_meier(&bundle)?;
        Ok(EmpiricalSurvival {
            bundle,
            cum_hazard,
            c_curve,
            km_curve,
            km_singular_from,
            survival,
        })
    }

    pub fn bundle(&self) -> &HazardBundle {
        &self.bundle
    }
}

impl SurvivalSource for EmpiricalSurvival {
    fn tau(&self) -> f64 {
        self.bundle.tau
    }

    fn at_risk(&self, t: f64) -> Result<f64> {
        check_time(t, self.tau())?;
        self.bundle.at_risk.eval(t)
    }

    fn uncensored(&self, t: f64) -> Result<f64> {
        check_time(t, self.tau())?;
        self.bundle.uncensored.eval(t)
    }

    fn uncensored_left(&self, t: f64) -> Result<f64> {
        check_time(t, self.tau())?;
        if t == 0.0 {
            return Ok(0.0);
        }
        self.bundle.uncensored.left_limit(t)
    }

    fn cumulative_hazard(&self, t: f64) -> Result<f64> {
        check_time(t, self.tau())?;
        self.cum_hazard.eval(t)
    }

    fn c_function(&self, t: f64) -> Result<f64> {
        check_time(t, self.tau())?;
        self.c_curve.eval(t)
    }

    fn km_integral(&self, t: f64) -> Result<f64> {
        check_time(t, self.tau())?;
        if let Some(u) = self.km_singular_from {
            if t >= u {
                return Err(Error::Singularity {
                    time: u,
                    what: "hazard jump of 1 in the Kaplan-Meier kernel".into(),
                });
            }
        }
        self.km_curve.eval(t)
    }

    fn survival(&self, t: f64) -> Result<f64> {
        check_time(t, self.tau())?;
        self.survival.eval(t)
    }
}

/// Continuous failure and censoring laws mixed with weights `λ`. Integrals
/// are computed by adaptive quadrature.
#[derive(Clone, Debug)]
pub struct AnalyticSurvival {
    failure: Vec<Law>,
    censoring: Vec<Option<Law>>,
    lambdas: LambdaVector,
    tau: f64,
    cuts: Vec<f64>,
}

impl AnalyticSurvival {
    pub fn new(
        failure: Vec<Law>,
        censoring: Vec<Option<Law>>,
        lambdas: LambdaVector,
        tau: f64,
    ) -> Result<AnalyticSurvival> {
        if failure.len() != lambdas.len() || censoring.len() != lambdas.len() {
            return Err(Error::Config("one failure and censoring law per group".into()));
        }
        let laws = failure.iter().chain(censoring.iter().flatten());
        let mut cuts = Vec::new();
        for law in laws {
            law.validate()?;
            if law.density(0.0).is_none() {
                return Err(Error::Config("analytic survival targets need continuous laws".into()));
            }
            if let Law::Uniform { lo, hi } = law {
                cuts.extend([*lo, *hi]);
            }
        }
        let pop = AnalyticSurvival {
            failure,
            censoring,
            lambdas,
            tau,
            cuts,
        };
        if !(tau > 0.0) || pop.at_risk_raw(tau) <= 0.0 {
            return Err(Error::Config(format!("at-risk probability vanishes by tau = {tau}")));
        }
        Ok(pop)
    }

    fn at_risk_raw(&self, t: f64) -> f64 {
        self.failure
            .iter()
            .zip(&self.censoring)
            .zip(self.lambdas.as_slice())
            .map(|((f, c), l)| {
                let cens = c.as_ref().map_or(1.0, |c| 1.0 - c.cdf(t));
                l * (1.0 - f.cdf(t)) * cens
            })
            .sum()
    }

    fn uncensored_density(&self, u: f64) -> f64 {
        self.failure
            .iter()
            .zip(&self.censoring)
            .zip(self.lambdas.as_slice())
            .map(|((f, c), l)| {
                let cens = c.as_ref().map_or(1.0, |c| 1.0 - c.cdf(u));
                l * f.density(u).unwrap_or(0.0) * cens
            })
            .sum()
    }

    fn integral<F: Fn(f64) -> f64>(&self, f: F, t: f64) -> f64 {
        integrate(&f, 0.0, t, &self.cuts, QUAD_TOL)
    }
}

impl SurvivalSource for AnalyticSurvival {
    fn tau(&self) -> f64 {
        self.tau
    }

    fn at_risk(&self, t: f64) -> Result<f64> {
        check_time(t, self.tau)?;
        Ok(self.at_risk_raw(t))
    }

    fn uncensored(&self, t: f64) -> Result<f64> {
        check_time(t, self.tau)?;
        Ok(self.integral(|u| self.uncensored_density(u), t))
    }

    fn uncensored_left(&self, t: f64) -> Result<f64> {
        self.uncensored(t)
    }

    fn cumulative_hazard(&self, t: f64) -> Result<f64> {
        check_time(t, self.tau)?;
        Ok(self.integral(|u| self.uncensored_density(u) / self.at_risk_raw(u), t))
    }

    fn c_function(&self, t: f64) -> Result<f64> {
        check_time(t, self.tau)?;
        Ok(self.integral(
            |u| {
                let r = self.at_risk_raw(u);
                self.uncensored_density(u) / (r * r)
            },
            t,
        ))
    }

    fn km_integral(&self, t: f64) -> Result<f64> {
        self.c_function(t)
    }

    fn survival(&self, t: f64) -> Result<f64> {
        Ok((-self.cumulative_hazard(t)?).exp())
    }
}

/// Pooled population `H = Σ λ_i P_i` with optional survival extension.
#[derive(Debug)]
pub struct PooledPopulation {
    pub lambdas: LambdaVector,
    pub plain: Option<PlainSource>,
    pub survival: Option<Box<dyn SurvivalSource>>,
}

impl PooledPopulation {
    pub fn plain(source: PlainSource, lambdas: LambdaVector) -> Result<PooledPopulation> {
        if let PlainSource::Mixture(laws) = &source {
            if laws.len() != lambdas.len() {
                return Err(Error::Config("one law per group".into()));
            }
            for law in laws {
                law.validate()?;
            }
        }
        Ok(PooledPopulation {
            lambdas,
            plain: Some(source),
            survival: None,
        })
    }

    pub fn survival(source: Box<dyn SurvivalSource>, lambdas: LambdaVector) -> PooledPopulation {
        PooledPopulation {
            lambdas,
            plain: None,
            survival: Some(source),
        }
    }

    pub fn num_groups(&self) -> usize {
        self.lambdas.len()
    }

    fn plain_source(&self) -> Result<&PlainSource> {
        self.plain
            .as_ref()
            .ok_or_else(|| Error::Contract("population has no plain distribution".into()))
    }

    pub fn survival_source(&self) -> Result<&dyn SurvivalSource> {
        self.survival
            .as_deref()
            .ok_or_else(|| Error::Contract("population has no survival extension".into()))
    }

    /// `H(x)`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        Ok(match self.plain_source()? {
            PlainSource::Empirical(f) => f.eval(x)?,
            PlainSource::Mixture(laws) => laws
                .iter()
                .zip(self.lambdas.as_slice())
                .map(|(l, w)| w * l.cdf(x))
                .sum(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirical::CensoredObs;

    fn exp_pop() -> AnalyticSurvival {
        let lambdas = LambdaVector::new(vec![0.5, 0.5]).unwrap();
        let exp1 = Law::Exponential { rate: 1.0 };
        AnalyticSurvival::new(vec![exp1.clone(), exp1], vec![None, None], lambdas, 3.0).unwrap()
    }

    #[test]
    fn analytic_exponential_without_censoring() {
        let p = exp_pop();
        for t in [0.0, 0.5, 1.0, 2.5] {
            assert!((p.c_function(t).unwrap() - (t.exp() - 1.0)).abs() < 1e-10);
            assert!((p.cumulative_hazard(t).unwrap() - t).abs() < 1e-10);
            assert!((p.survival(t).unwrap() - (-t).exp()).abs() < 1e-10);
            assert!((p.at_risk(t).unwrap() - (-t).exp()).abs() < 1e-15);
        }
        assert!(p.c_function(3.5).is_err());
    }

    #[test]
    fn analytic_rejects_vanishing_risk_set() {
        let lambdas = LambdaVector::new(vec![0.5, 0.5]).unwrap();
        let u = Law::Uniform { lo: 0.0, hi: 1.0 };
        assert!(AnalyticSurvival::new(vec![u.clone(), u], vec![None, None], lambdas, 1.0).is_err());
    }

    #[test]
    fn empirical_c_function_one_jump() {
        // One event among three at risk at time 1: ΔΛ = 1/3, H̄(1) = 1.
        let obs: Vec<CensoredObs> = [(1.0, true), (2.0, false), (3.0, false)]
            .iter()
            .map(|&(t, e)| CensoredObs::new(t, e))
            .collect();
        let p = EmpiricalSurvival::new(HazardBundle::from_sample(&obs, 2.5).unwrap()).unwrap();
        let h = 1.0 / 3.0;
        assert!((p.c_function(1.5).unwrap() - (1.0 - h) * h / 1.0).abs() < 1e-15);
        assert_eq!(p.c_function(0.5).unwrap(), 0.0);
        assert!((p.km_integral(2.0).unwrap() - h / (1.0 - h)).abs() < 1e-15);
        assert!((p.survival(2.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(p.uncensored_left(1.0).unwrap(), 0.0);
        assert!((p.uncensored(1.0).unwrap() - h).abs() < 1e-15);
    }

    #[test]
    fn empirical_km_integral_singularity() {
        let obs = [CensoredObs::new(1.0, true), CensoredObs::new(2.0, true)];
        let p = EmpiricalSurvival::new(HazardBundle::from_sample(&obs, 2.0).unwrap()).unwrap();
        assert!(p.km_integral(1.5).is_ok());
        assert!(matches!(p.km_integral(2.0), Err(Error::Singularity { time, .. }) if time == 2.0));
    }
}
