/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance
/// `tol`. `cuts` are interior points where `f` may have kinks.
pub(crate) fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, cuts: &[f64], tol: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    let mut knots = vec![a];
    knots.extend(cuts.iter().copied().filter(|&c| a < c && c < b));
    knots.push(b);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let piece_tol = tol / (knots.len() - 1) as f64;
    knots.windows(2).map(|w| simpson(f, w[0], w[1], piece_tol)).sum()
}

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let c = 0.5 * (a + b);
    let (fa, fb, fc) = (f(a), f(b), f(c));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
    refine(f, a, b, fa, fb, fc, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    fc: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let c = 0.5 * (a + b);
    let (d, e) = (0.5 * (a + c), 0.5 * (c + b));
    let (fd, fe) = (f(d), f(e));
    let left = (c - a) / 6.0 * (fa + 4.0 * fd + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * fe + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    refine(f, a, c, fa, fc, fd, left, 0.5 * tol, depth - 1) + refine(f, c, b, fc, fb, fe, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_and_kinked_integrands() {
        let v = integrate(&|u: f64| u.exp(), 0.0, 1.0, &[], 1e-12);
        assert!((v - (1.0f64.exp() - 1.0)).abs() < 1e-10);
        let kink = integrate(&|u: f64| (u - 0.3).abs(), 0.0, 1.0, &[0.3], 1e-12);
        assert!((kink - (0.045 + 0.245)).abs() < 1e-12);
        assert_eq!(integrate(&|u: f64| u, 1.0, 1.0, &[], 1e-12), 0.0);
    }
}
