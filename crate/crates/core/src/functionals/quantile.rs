use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stepfn::{Convention, StepFn};

/// A nondecreasing right-continuous function, a level `p`, and optionally
/// the analytic slope `A'(ξ_p)` of the limit function at the solution.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantileProblem {
    pub function: StepFn,
    pub p: f64,
    pub derivative_at_solution: Option<f64>,
}

impl QuantileProblem {
    pub fn new(function: StepFn, p: f64) -> Result<QuantileProblem> {
        if function.convention() != Convention::RightContinuous {
            return Err(Error::Contract("quantile needs a right-continuous function".into()));
        }
        if !function.is_nondecreasing() {
            return Err(Error::Contract("quantile needs a nondecreasing function".into()));
        }
        if !p.is_finite() {
            return Err(Error::Domain(format!("level p = {p} is not finite")));
        }
        Ok(QuantileProblem {
            function,
            p,
            derivative_at_solution: None,
        })
    }

    pub fn with_derivative(mut self, slope: f64) -> QuantileProblem {
        self.derivative_at_solution = Some(slope);
        self
    }
}

/// The smallest `y` with `A(y) ≥ p`.
pub fn quantile(problem: &QuantileProblem) -> Result<f64> {
    let f = &problem.function;
    if f.base() >= problem.p {
        return Ok(f.lo());
    }
    f.breakpoints()
        .iter()
        .zip(f.levels())
        .find(|&(_, &level)| level >= problem.p)
        .map(|(&b, _)| b)
        .ok_or_else(|| Error::Domain(format!("no solution of A(y) >= {} in the domain", problem.p)))
}

/// `−α(ξ_p) / A'(ξ_p)`.
pub fn inverse_derivative(alpha_value: f64, slope: Option<f64>) -> Result<f64> {
    match slope {
        Some(d) if d > 0.0 => Ok(-alpha_value / d),
        Some(d) => Err(Error::Contract(format!(
            "derivative at the solution must be positive, got {d}"
        ))),
        None => Err(Error::Contract("derivative at the solution is required".into())),
    }
}

pub fn quantile_derivative(problem: &QuantileProblem, alpha: &StepFn) -> Result<f64> {
    if problem.derivative_at_solution.is_none() {
        return inverse_derivative(0.0, None);
    }
    let xi = quantile(problem)?;
    inverse_derivative(alpha.eval(xi)?, problem.derivative_at_solution)
}

/// Continuous piecewise-linear function on `[xs[0], xs[last]]` with explicit
/// slopes, so that values at knots and inverse images are computed without
/// re-deriving slopes from rounded differences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn from_parts(xs: Vec<f64>, ys: Vec<f64>, slopes: Vec<f64>) -> Result<PiecewiseLinear> {
        if xs.len() < 2 || ys.len() != xs.len() || slopes.len() + 1 != xs.len() {
            return Err(Error::Contract("piecewise-linear shape mismatch".into()));
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Contract("piecewise-linear knots must increase strictly".into()));
        }
        if xs.iter().chain(&ys).chain(&slopes).any(|v| !v.is_finite()) {
            return Err(Error::Contract("piecewise-linear data must be finite".into()));
        }
        Ok(PiecewiseLinear { xs, ys, slopes })
    }

    pub fn from_points(points: &[(f64, f64)]) -> Result<PiecewiseLinear> {
        let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
        let slopes = points
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .collect();
        PiecewiseLinear::from_parts(xs, ys, slopes)
    }

    pub fn knots(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }

    pub fn lo(&self) -> f64 {
        self.xs[0]
    }

    pub fn hi(&self) -> f64 {
        self.xs[self.xs.len() - 1]
    }

    fn segment(&self, x: f64) -> usize {
        let k = self.xs.partition_point(|&k| k <= x);
        k.saturating_sub(1).min(self.slopes.len() - 1)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(self.lo() <= x && x <= self.hi()) {
            return Err(Error::Domain(format!("{x} outside [{}, {}]", self.lo(), self.hi())));
        }
        if let Ok(k) = self.xs.binary_search_by(|k| k.total_cmp(&x)) {
            return Ok(self.ys[k]);
        }
        let k = self.segment(x);
        if x - self.xs[k] <= self.xs[k + 1] - x {
            Ok(self.ys[k] + self.slopes[k] * (x - self.xs[k]))
        } else {
            Ok(self.ys[k + 1] - self.slopes[k] * (self.xs[k + 1] - x))
        }
    }

    /// Right derivative at `x` (left derivative at the upper end).
    pub fn slope_at(&self, x: f64) -> Result<f64> {
        if !(self.lo() <= x && x <= self.hi()) {
            return Err(Error::Domain(format!("{x} outside [{}, {}]", self.lo(), self.hi())));
        }
        Ok(self.slopes[self.segment(x)])
    }

    pub fn add_constant(&self, c: f64) -> PiecewiseLinear {
        PiecewiseLinear {
            xs: self.xs.clone(),
            ys: self.ys.iter().map(|y| y + c).collect(),
            slopes: self.slopes.clone(),
        }
    }

    /// `self + c·other` on the common domain, knots merged.
    pub fn add_scaled(&self, c: f64, other: &PiecewiseLinear) -> Result<PiecewiseLinear> {
        if self.lo() != other.lo() || self.hi() != other.hi() {
            return Err(Error::Contract("piecewise-linear domain mismatch".into()));
        }
        let mut xs: Vec<f64> = self.xs.iter().chain(&other.xs).copied().collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let ys = xs
            .iter()
            .map(|&x| Ok(self.eval(x)? + c * other.eval(x)?))
            .collect::<Result<Vec<f64>>>()?;
        let slopes = xs
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                self.slopes[self.segment(mid)] + c * other.slopes[other.segment(mid)]
            })
            .collect();
        PiecewiseLinear::from_parts(xs, ys, slopes)
    }

    /// Infimum of `{x : f(x) ≥ p}` for nondecreasing `f`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if self.slopes.iter().any(|&s| s < 0.0) {
            return Err(Error::Contract("quantile needs a nondecreasing function".into()));
        }
        if self.ys[0] >= p {
            return Ok(self.xs[0]);
        }
        for k in 0..self.slopes.len() {
            if self.ys[k + 1] >= p {
                let x = self.xs[k] + (p - self.ys[k]) / self.slopes[k];
                return Ok(x.min(self.xs[k + 1]));
            }
        }
        Err(Error::Domain(format!("no solution of f(x) >= {p} in the domain")))
    }

    /// `sup_{x ∈ [a, b] ∩ domain} |f(x)|`, attained at knots or window ends.
    pub fn sup_abs_on(&self, a: f64, b: f64) -> Result<f64> {
        let (a, b) = (a.max(self.lo()), b.min(self.hi()));
        if a > b {
            return Ok(0.0);
        }
        let mut best = self.eval(a)?.abs().max(self.eval(b)?.abs());
        for (&x, &y) in self.xs.iter().zip(&self.ys) {
            if a < x && x < b {
                best = best.max(y.abs());
            }
        }
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirical::ecdf;

    #[test]
    fn quantile_examples() {
        let f = ecdf(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(quantile(&QuantileProblem::new(f.clone(), 0.5).unwrap()).unwrap(), 2.0);
        assert_eq!(quantile(&QuantileProblem::new(f.clone(), 0.51).unwrap()).unwrap(), 3.0);
        assert_eq!(
            quantile(&QuantileProblem::new(f.clone(), 0.0).unwrap()).unwrap(),
            f64::NEG_INFINITY
        );
        assert!(matches!(
            quantile(&QuantileProblem::new(f, 1.5).unwrap()),
            Err(Error::Domain(_))
        ));

        // A(x) = x on [0, 2] on a grid of width 1/64.
        let breaks: Vec<f64> = (1..=128).map(|k| f64::from(k) / 64.0).collect();
        let jumps = vec![1.0 / 64.0; 128];
        let a = StepFn::from_jumps(0.0, 2.0, 0.0, breaks, &jumps, Convention::RightContinuous).unwrap();
        let xi = quantile(&QuantileProblem::new(a, 1.0).unwrap()).unwrap();
        assert!((xi - 1.0).abs() <= 1.0 / 64.0);
    }

    #[test]
    fn quantile_rejects_decreasing_input() {
        let f = StepFn::from_jumps(0.0, 1.0, 1.0, vec![0.5], &[-1.0], Convention::RightContinuous).unwrap();
        assert!(QuantileProblem::new(f, 0.5).is_err());
    }

    #[test]
    fn quantile_derivative_examples() {
        let f = ecdf(&[1.0, 2.0]).unwrap();
        let prob = QuantileProblem::new(f.clone(), 0.5).unwrap().with_derivative(1.0);
        let one = StepFn::constant(f64::NEG_INFINITY, f64::INFINITY, 1.0, Convention::RightContinuous).unwrap();
        assert_eq!(quantile_derivative(&prob, &one).unwrap(), -1.0);
        assert_eq!(quantile_derivative(&prob, &one.scale(0.0)).unwrap(), 0.0);
        assert_eq!(quantile_derivative(&prob, &one.scale(2.0)).unwrap(), -2.0);
        let missing = QuantileProblem::new(f.clone(), 0.5).unwrap();
        assert!(matches!(quantile_derivative(&missing, &one), Err(Error::Contract(_))));
        let flat = QuantileProblem::new(f, 0.5).unwrap().with_derivative(0.0);
        assert!(matches!(quantile_derivative(&flat, &one), Err(Error::Contract(_))));
    }

    #[test]
    fn piecewise_linear_basics() {
        let f = PiecewiseLinear::from_points(&[(0.0, 0.0), (1.0, 2.0), (3.0, 3.0)]).unwrap();
        assert_eq!(f.eval(0.5).unwrap(), 1.0);
        assert_eq!(f.eval(2.0).unwrap(), 2.5);
        assert_eq!(f.quantile(2.5).unwrap(), 2.0);
        assert_eq!(f.quantile(-1.0).unwrap(), 0.0);
        assert!(f.quantile(4.0).is_err());
        let g = PiecewiseLinear::from_points(&[(0.0, 0.0), (3.0, 3.0)]).unwrap();
        let d = f.add_scaled(-1.0, &g).unwrap();
        assert_eq!(d.knots(), &[0.0, 1.0, 3.0]);
        assert_eq!(d.values(), &[0.0, 1.0, 0.0]);
        assert_eq!(d.sup_abs_on(-5.0, 0.5).unwrap(), 0.5);
        assert_eq!(d.sup_abs_on(0.5, 2.0).unwrap(), 1.0);
        assert!(PiecewiseLinear::from_points(&[(1.0, 0.0), (1.0, 1.0)]).is_err());
    }
}
