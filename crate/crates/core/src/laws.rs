//! Parametric laws used to simulate groups and censoring.

use rand::Rng;
use rand_distr::{Distribution, Exp, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Law {
    Exponential {
        rate: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Finitely many atoms `(value, weight)`; weights are normalized.
    PointMass {
        atoms: Vec<(f64, f64)>,
    },
}

impl Law {
    pub fn validate(&self) -> Result<()> {
        match self {
            Law::Exponential { rate } if !(rate.is_finite() && *rate > 0.0) => {
                Err(Error::Config(format!("exponential rate must be positive, got {rate}")))
            }
            Law::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite() && lo < hi) => {
                Err(Error::Config(format!("uniform needs lo < hi, got [{lo}, {hi}]")))
            }
            Law::PointMass { atoms } => {
                let ok = !atoms.is_empty() && atoms.iter().all(|(v, w)| v.is_finite() && w.is_finite() && *w > 0.0);
                if ok {
                    Ok(())
                } else {
                    Err(Error::Config(
                        "point masses need finite values and positive weights".into(),
                    ))
                }
            }
            _ => Ok(()),
        }
    }

    fn total_weight(atoms: &[(f64, f64)]) -> f64 {
        atoms.iter().map(|a| a.1).sum()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Law::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Law::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Law::PointMass { atoms } => {
                let below: f64 = atoms.iter().filter(|a| a.0 <= x).map(|a| a.1).sum();
                below / Law::total_weight(atoms)
            }
        }
    }

    /// `P(X < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match self {
            Law::PointMass { atoms } => {
                let below: f64 = atoms.iter().filter(|a| a.0 < x).map(|a| a.1).sum();
                below / Law::total_weight(atoms)
            }
            _ => self.cdf(x),
        }
    }

    /// Lebesgue density, `None` for atomic laws.
    pub fn density(&self, x: f64) -> Option<f64> {
        match self {
            Law::Exponential { rate } => Some(if x < 0.0 { 0.0 } else { rate * (-rate * x).exp() }),
            Law::Uniform { lo, hi } => Some(if x < *lo || x > *hi { 0.0 } else { 1.0 / (hi - lo) }),
            Law::PointMass { .. } => None,
        }
    }

    /// Atoms with normalized weights; empty for continuous laws.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        match self {
            Law::PointMass { atoms } => {
                let total = Law::total_weight(atoms);
                atoms.iter().map(|&(v, w)| (v, w / total)).collect()
            }
            _ => Vec::new(),
        }
    }

    /// Support bounds `(inf, sup)`.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Law::Exponential { .. } => (0.0, f64::INFINITY),
            Law::Uniform { lo, hi } => (*lo, *hi),
            Law::PointMass { atoms } => atoms
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x.0), b.max(x.0))),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Law::Exponential { rate } => Exp::new(*rate).expect("validated rate").sample(rng),
            Law::Uniform { lo, hi } => Uniform::new(*lo, *hi).expect("validated bounds").sample(rng),
            Law::PointMass { atoms } => {
                let total = Law::total_weight(atoms);
                let u: f64 = rng.random::<f64>() * total;
                let mut acc = 0.0;
                for &(v, w) in atoms {
                    acc += w;
                    if u < acc {
                        return v;
                    }
                }
                atoms[atoms.len() - 1].0
            }
        }
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}
