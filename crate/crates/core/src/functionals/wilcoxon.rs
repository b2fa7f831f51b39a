use crate::error::{Error, Result};
use crate::stepfn::{affine_combine, ls_integral, ls_integral_curve, Convention, JumpAtZeroPolicy, StepFn};

use super::same_domain;

fn check_right(fns: &[&StepFn]) -> Result<()> {
    if fns.iter().any(|f| f.convention() != Convention::RightContinuous) {
        return Err(Error::Contract("Wilcoxon arguments must be right-continuous".into()));
    }
    same_domain(fns)
}

/// `ψ(A, B)(upto) = ∫_(a, upto] A dB`.
pub fn wilcoxon(a: &StepFn, b: &StepFn, upto: f64) -> Result<f64> {
    check_right(&[a, b])?;
    ls_integral(a, b, upto, JumpAtZeroPolicy::OPEN)
}

/// The curve `t ↦ ψ(A, B)(t)`.
pub fn wilcoxon_curve(a: &StepFn, b: &StepFn) -> Result<StepFn> {
    check_right(&[a, b])?;
    ls_integral_curve(a, b, JumpAtZeroPolicy::OPEN)
}

/// `ψ'_{(A,B)}(α, β) = ∫ A dβ + ∫ α dB`, both over `(a, ·]`.
pub fn wilcoxon_derivative(a: &StepFn, b: &StepFn, alpha: &StepFn, beta: &StepFn) -> Result<StepFn> {
    check_right(&[a, b, alpha, beta])?;
    let first = ls_integral_curve(a, beta, JumpAtZeroPolicy::OPEN)?;
    let second = ls_integral_curve(alpha, b, JumpAtZeroPolicy::OPEN)?;
    affine_combine(&[1.0, 1.0], &[&first, &second])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirical::ecdf;

    const INF: f64 = f64::INFINITY;

    #[test]
    fn wilcoxon_examples() {
        let f = ecdf(&[1.0, 2.0]).unwrap();
        assert_eq!(wilcoxon(&f, &f, INF).unwrap(), 0.75);
        let flat = StepFn::constant(-INF, INF, 0.3, Convention::RightContinuous).unwrap();
        assert_eq!(wilcoxon(&f, &flat, INF).unwrap(), 0.0);
        assert_eq!(wilcoxon_curve(&f, &f).unwrap().eval(1.5).unwrap(), 0.25);
    }

    #[test]
    fn wilcoxon_of_identical_continuous_laws_tends_to_half() {
        // Interleaved samples: the estimate (1/n²) Σ_j #{x ≤ y_j} is (n+1)/(2n).
        let n = 200;
        let xs: Vec<f64> = (0..n).map(|i| (2 * i) as f64).collect();
        let ys: Vec<f64> = (0..n).map(|i| (2 * i + 1) as f64).collect();
        let v = wilcoxon(&ecdf(&xs).unwrap(), &ecdf(&ys).unwrap(), INF).unwrap();
        assert!((v - (n + 1) as f64 / (2 * n) as f64).abs() < 1e-12);
        assert!((v - 0.5).abs() < 1e-2);
    }

    #[test]
    fn derivative_examples() {
        let e = ecdf(&[1.0]).unwrap();
        let zero = StepFn::constant(-INF, INF, 0.0, Convention::RightContinuous).unwrap();
        let d0 = wilcoxon_derivative(&e, &e, &zero, &zero).unwrap();
        assert_eq!(d0.sup_norm(), 0.0);
        let d = wilcoxon_derivative(&e, &e, &e, &e).unwrap();
        assert_eq!(d.eval(1.0).unwrap(), 2.0);
        assert_eq!(d.eval(0.5).unwrap(), 0.0);
    }

    #[test]
    fn derivative_is_linear_in_direction() {
        // Dyadic sample sizes keep every level and product exact.
        let a = ecdf(&[0.5, 1.0, 3.0, 5.0]).unwrap();
        let b = ecdf(&[0.25, 2.0]).unwrap();
        let al = ecdf(&[1.0, 2.0]).unwrap().scale(0.5);
        let be = ecdf(&[0.5, 3.0, 4.0, 4.5]).unwrap();
        let al2 = ecdf(&[0.25]).unwrap();
        let be2 = ecdf(&[2.0, 4.0]).unwrap().scale(-1.0);
        let d1 = wilcoxon_derivative(&a, &b, &al, &be).unwrap();
        let d2 = wilcoxon_derivative(&a, &b, &al2, &be2).unwrap();
        let sum_al = affine_combine(&[1.0, 1.0], &[&al, &al2]).unwrap();
        let sum_be = affine_combine(&[1.0, 1.0], &[&be, &be2]).unwrap();
        let d12 = wilcoxon_derivative(&a, &b, &sum_al, &sum_be).unwrap();
        let scaled = wilcoxon_derivative(&a, &b, &al.scale(2.0), &be.scale(2.0)).unwrap();
        for t in [0.0, 0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0] {
            assert_eq!(d12.eval(t).unwrap(), d1.eval(t).unwrap() + d2.eval(t).unwrap());
            assert_eq!(scaled.eval(t).unwrap(), 2.0 * d1.eval(t).unwrap());
        }
    }

    #[test]
    fn domain_and_convention_checks() {
        let a = ecdf(&[1.0]).unwrap();
        let b = StepFn::constant(0.0, 5.0, 1.0, Convention::RightContinuous).unwrap();
        assert!(matches!(wilcoxon(&a, &b, 1.0), Err(Error::Contract(_))));
        let left = a.with_convention(Convention::LeftContinuous).unwrap();
        assert!(wilcoxon(&left, &a, 1.0).is_err());
    }
}
