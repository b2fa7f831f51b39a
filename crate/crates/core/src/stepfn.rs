//! Piecewise-constant functions with finitely many jumps.
//!
//! A [`StepFn`] is stored as a base level plus the level reached after each
//! breakpoint. Jumps are derived as level differences, so pointwise linear
//! combinations are computed level-by-level and agree bit-for-bit with the
//! same combination of pointwise evaluations.
//!
//! Domain endpoints may be `±∞`. They are only ever compared against, never
//! used in arithmetic.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// Càdlàg: the value at a breakpoint includes its jump.
    RightContinuous,
    /// Càglàd: the value at a breakpoint excludes its jump.
    LeftContinuous,
}

impl Convention {
    fn tag(self) -> &'static str {
        match self {
            Convention::RightContinuous => "right",
            Convention::LeftContinuous => "left",
        }
    }

    fn from_tag(s: &str) -> Result<Self> {
        match s {
            "right" => Ok(Convention::RightContinuous),
            "left" => Ok(Convention::LeftContinuous),
            other => Err(Error::Parse(format!("unknown convention {other:?}"))),
        }
    }
}

/// Whether a Stieltjes sum over `[0, t]` picks up the value at the lower
/// endpoint as a jump, i.e. `Δf(0) := f(0)`.
///
/// Integrals over `(a, t]` use [`JumpAtZeroPolicy::OPEN`]; survival integrals
/// over `[0, t]` use [`JumpAtZeroPolicy::CLOSED`]. The zero term only applies
/// when the integrator's domain starts exactly at `0`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JumpAtZeroPolicy {
    pub enabled: bool,
}

impl JumpAtZeroPolicy {
    pub const OPEN: JumpAtZeroPolicy = JumpAtZeroPolicy { enabled: false };
    pub const CLOSED: JumpAtZeroPolicy = JumpAtZeroPolicy { enabled: true };

    pub(crate) fn applies_to(self, f: &StepFn) -> bool {
        self.enabled && f.lo == 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStepFn")]
pub struct StepFn {
    #[serde(with = "bound")]
    lo: f64,
    #[serde(with = "bound")]
    hi: f64,
    base: f64,
    breaks: Vec<f64>,
    /// `levels[k]` is the value on `[breaks[k], breaks[k + 1])` in the
    /// right-continuous reading.
    levels: Vec<f64>,
    convention: Convention,
}

#[derive(Deserialize)]
struct RawStepFn {
    #[serde(with = "bound")]
    lo: f64,
    #[serde(with = "bound")]
    hi: f64,
    base: f64,
    breaks: Vec<f64>,
    levels: Vec<f64>,
    convention: Convention,
}

impl TryFrom<RawStepFn> for StepFn {
    type Error = Error;

    fn try_from(r: RawStepFn) -> Result<StepFn> {
        StepFn::from_levels(r.lo, r.hi, r.base, r.breaks, r.levels, r.convention)
    }
}

/// Domain endpoints as JSON: finite numbers, or the strings `"-inf"` and `"inf"`.
mod bound {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_infinite() {
            s.serialize_str(if *x > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*x)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Str(s) => match s.as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(de::Error::custom(format!("invalid domain bound {other:?}"))),
            },
        }
    }
}

fn check_domain(lo: f64, hi: f64) -> Result<()> {
    if lo.is_nan() || hi.is_nan() || lo >= hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
        return Err(Error::Contract(format!("invalid domain [{lo}, {hi}]")));
    }
    Ok(())
}

impl StepFn {
    pub fn constant(lo: f64, hi: f64, value: f64, convention: Convention) -> Result<StepFn> {
        StepFn::from_levels(lo, hi, value, Vec::new(), Vec::new(), convention)
    }

    pub fn from_levels(
        lo: f64,
        hi: f64,
        base: f64,
        breaks: Vec<f64>,
        levels: Vec<f64>,
        convention: Convention,
    ) -> Result<StepFn> {
        check_domain(lo, hi)?;
        if breaks.len() != levels.len() {
            return Err(Error::Contract(format!(
                "{} breakpoints but {} levels",
                breaks.len(),
                levels.len()
            )));
        }
        if !base.is_finite() || levels.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("step function levels must be finite".into()));
        }
        // A left-continuous function may drop right after `lo`.
        let mut prev: Option<f64> = None;
        for &b in &breaks {
            let above_lo = match convention {
                Convention::RightContinuous => b > lo,
                Convention::LeftContinuous => b >= lo,
            };
            if !b.is_finite() || !above_lo || b > hi || prev.is_some_and(|p| b <= p) {
                return Err(Error::Contract(format!(
                    "breakpoint {b} is not strictly increasing within the domain [{lo}, {hi}]"
                )));
            }
            prev = Some(b);
        }
        Ok(StepFn {
            lo,
            hi,
            base,
            breaks,
            levels,
            convention,
        })
    }

    pub fn from_jumps(
        lo: f64,
        hi: f64,
        base: f64,
        breaks: Vec<f64>,
        jumps: &[f64],
        convention: Convention,
    ) -> Result<StepFn> {
        let mut level = base;
        let levels = jumps
            .iter()
            .map(|j| {
                level += j;
                level
            })
            .collect();
        StepFn::from_levels(lo, hi, base, breaks, levels, convention)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breaks
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.breaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.breaks.is_empty()
    }

    /// Level in force just before breakpoint `k`.
    pub(crate) fn level_before(&self, k: usize) -> f64 {
        if k == 0 {
            self.base
        } else {
            self.levels[k - 1]
        }
    }

    pub fn jump(&self, k: usize) -> f64 {
        self.levels[k] - self.level_before(k)
    }

    pub fn jumps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.breaks.len()).map(move |k| (self.breaks[k], self.jump(k)))
    }

    /// Level after the last breakpoint.
    pub fn final_level(&self) -> f64 {
        self.levels.last().copied().unwrap_or(self.base)
    }

    fn contains(&self, t: f64) -> bool {
        self.lo <= t && t <= self.hi
    }

    /// Number of breakpoints whose jump is already included in the value at `t`.
    fn count_included(&self, t: f64) -> usize {
        match self.convention {
            Convention::RightContinuous => self.breaks.partition_point(|&b| b <= t),
            Convention::LeftContinuous => self.breaks.partition_point(|&b| b < t),
        }
    }

    /// Right-continuous level at `t` regardless of convention.
    pub(crate) fn level_at_or_after(&self, t: f64) -> f64 {
        let k = self.breaks.partition_point(|&b| b <= t);
        self.level_before(k)
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !self.contains(t) {
            return Err(Error::Domain(format!("t = {t} outside [{}, {}]", self.lo, self.hi)));
        }
        Ok(self.level_before(self.count_included(t)))
    }

    /// `lim_{s ↗ t} f(s)`.
    pub fn left_limit(&self, t: f64) -> Result<f64> {
        if !(self.lo < t && t <= self.hi) {
            return Err(Error::Domain(format!(
                "left limit at {t} needs t in ({}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(self.level_before(self.breaks.partition_point(|&b| b < t)))
    }

    pub fn total_variation(&self) -> f64 {
        (0..self.breaks.len()).map(|k| self.jump(k).abs()).sum()
    }

    /// Same levels read under another continuity convention. For a
    /// right-continuous `f`, the left-continuous copy evaluates to `f(t-)`.
    pub fn with_convention(&self, convention: Convention) -> Result<StepFn> {
        StepFn::from_levels(
            self.lo,
            self.hi,
            self.base,
            self.breaks.clone(),
            self.levels.clone(),
            convention,
        )
    }

    /// Restriction to `[lo, new_hi]`.
    pub fn restrict(&self, new_hi: f64) -> Result<StepFn> {
        if !(self.lo < new_hi && new_hi <= self.hi) {
            return Err(Error::Domain(format!(
                "cannot restrict [{}, {}] to upper end {new_hi}",
                self.lo, self.hi
            )));
        }
        let keep = self.breaks.partition_point(|&b| b <= new_hi);
        Ok(StepFn {
            lo: self.lo,
            hi: new_hi,
            base: self.base,
            breaks: self.breaks[..keep].to_vec(),
            levels: self.levels[..keep].to_vec(),
            convention: self.convention,
        })
    }

    pub fn scale(&self, c: f64) -> StepFn {
        StepFn {
            base: c * self.base,
            levels: self.levels.iter().map(|v| c * v).collect(),
            ..self.clone()
        }
    }

    /// Supremum of `|f|` over the domain, counting only levels that are
    /// actually attained under the function's convention.
    pub fn sup_norm(&self) -> f64 {
        let mut sup = self.base.abs();
        for (k, &b) in self.breaks.iter().enumerate() {
            let attained = match self.convention {
                Convention::RightContinuous => true,
                Convention::LeftContinuous => b < self.hi,
            };
            if attained {
                sup = sup.max(self.levels[k].abs());
            }
        }
        sup
    }

    pub fn is_nondecreasing(&self) -> bool {
        (0..self.breaks.len()).all(|k| self.jump(k) >= 0.0)
    }

    pub fn is_nonincreasing(&self) -> bool {
        (0..self.breaks.len()).all(|k| self.jump(k) <= 0.0)
    }

    /// Text form: a `lo hi convention base` header followed by one
    /// `breakpoint jump` pair per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:?} {:?} {} {:?}",
            self.lo,
            self.hi,
            self.convention.tag(),
            self.base
        );
        for (b, j) in self.jumps() {
            let _ = writeln!(out, "{b:?} {j:?}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<StepFn> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty step function text".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!("bad header {header:?}")));
        }
        let lo = parse_real(fields[0])?;
        let hi = parse_real(fields[1])?;
        let convention = Convention::from_tag(fields[2])?;
        let base = parse_real(fields[3])?;
        let mut breaks = Vec::new();
        let mut jumps = Vec::new();
        for line in lines {
            let mut parts = line.split_whitespace();
            let (Some(b), Some(j), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Parse(format!("bad jump line {line:?}")));
            };
            breaks.push(parse_real(b)?);
            jumps.push(parse_real(j)?);
        }
        StepFn::from_jumps(lo, hi, base, breaks, &jumps, convention)
    }
}

fn parse_real(s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")))
}

/// Union of breakpoints, exact comparison.
pub(crate) fn merged_breakpoints<'a>(fns: impl IntoIterator<Item = &'a StepFn>) -> Vec<f64> {
    let mut all: Vec<f64> = fns.into_iter().flat_map(|f| f.breaks.iter().copied()).collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    all
}

/// Pointwise `Σ cᵢ fᵢ` on the merged breakpoints.
pub fn affine_combine(coeffs: &[f64], fns: &[&StepFn]) -> Result<StepFn> {
    let first = fns
        .first()
        .ok_or_else(|| Error::Contract("affine_combine needs at least one function".into()))?;
    if coeffs.len() != fns.len() {
        return Err(Error::Contract(format!(
            "{} coefficients for {} functions",
            coeffs.len(),
            fns.len()
        )));
    }
    for f in fns {
        if f.convention != first.convention {
            return Err(Error::Contract("mixed continuity conventions".into()));
        }
        if f.lo != first.lo || f.hi != first.hi {
            return Err(Error::Contract(format!(
                "domain mismatch: [{}, {}] vs [{}, {}]",
                f.lo, f.hi, first.lo, first.hi
            )));
        }
    }
    let combine =
        |values: &mut dyn Iterator<Item = f64>| coeffs.iter().zip(values).fold(0.0, |acc, (c, v)| acc + c * v);
    let base = combine(&mut fns.iter().map(|f| f.base));
    let breaks = merged_breakpoints(fns.iter().copied());
    let mut cursors = vec![0usize; fns.len()];
    let mut levels = Vec::with_capacity(breaks.len());
    for &b in &breaks {
        for (cur, f) in cursors.iter_mut().zip(fns) {
            while *cur < f.breaks.len() && f.breaks[*cur] <= b {
                *cur += 1;
            }
        }
        levels.push(combine(&mut cursors.iter().zip(fns).map(|(&k, f)| f.level_before(k))));
    }
    Ok(StepFn {
        lo: first.lo,
        hi: first.hi,
        base,
        breaks,
        levels,
        convention: first.convention,
    })
}

/// `‖f − g‖_∞` over the common domain.
pub fn sup_distance(f: &StepFn, g: &StepFn) -> Result<f64> {
    Ok(affine_combine(&[1.0, -1.0], &[f, g])?.sup_norm())
}

/// Cumulative Stieltjes sum `t ↦ Σ_{u ≤ t} w(u, Δf(u))` over the jumps of `f`,
/// as a right-continuous step function on `f`'s domain. Under an enabled
/// [`JumpAtZeroPolicy`] the base value is `w(0, f(0))`.
pub fn stieltjes_curve<W>(f: &StepFn, policy: JumpAtZeroPolicy, mut weight: W) -> Result<StepFn>
where
    W: FnMut(f64, f64) -> Result<f64>,
{
    let base = if policy.applies_to(f) {
        weight(0.0, f.base)?
    } else {
        0.0
    };
    let mut acc = base;
    let mut levels = Vec::with_capacity(f.breaks.len());
    for k in 0..f.breaks.len() {
        acc += weight(f.breaks[k], f.jump(k))?;
        levels.push(acc);
    }
    Ok(StepFn {
        lo: f.lo,
        hi: f.hi,
        base,
        breaks: f.breaks.clone(),
        levels,
        convention: Convention::RightContinuous,
    })
}

/// `∫ g df` over `(lo, upto]`, or `[0, upto]` under an enabled policy.
/// `g` is read under its own convention at each jump of `f`.
pub fn ls_integral(g: &StepFn, f: &StepFn, upto: f64, policy: JumpAtZeroPolicy) -> Result<f64> {
    if !f.contains(upto) {
        return Err(Error::Domain(format!(
            "integration bound {upto} outside [{}, {}]",
            f.lo, f.hi
        )));
    }
    let mut acc = if policy.applies_to(f) {
        g.eval(0.0)? * f.base
    } else {
        0.0
    };
    let end = f.breaks.partition_point(|&b| b <= upto);
    for k in 0..end {
        acc += g.eval(f.breaks[k])? * f.jump(k);
    }
    Ok(acc)
}

/// The curve `t ↦ ls_integral(g, f, t)`.
pub fn ls_integral_curve(g: &StepFn, f: &StepFn, policy: JumpAtZeroPolicy) -> Result<StepFn> {
    stieltjes_curve(f, policy, |u, d| Ok(g.eval(u)? * d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const INF: f64 = f64::INFINITY;

    fn ecdf(xs: &[f64]) -> StepFn {
        let mut v = xs.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let mut breaks: Vec<f64> = Vec::new();
        let mut levels: Vec<f64> = Vec::new();
        for (i, x) in v.iter().enumerate() {
            if breaks.last() == Some(x) {
                *levels.last_mut().unwrap() = (i + 1) as f64 / n;
            } else {
                breaks.push(*x);
                levels.push((i + 1) as f64 / n);
            }
        }
        StepFn::from_levels(-INF, INF, 0.0, breaks, levels, Convention::RightContinuous).unwrap()
    }

    fn unit_jump(conv: Convention) -> StepFn {
        StepFn::from_jumps(0.0, 1.0, 0.0, vec![0.5], &[1.0], conv).unwrap()
    }

    #[test]
    fn eval_constant_and_conventions() {
        let c = StepFn::constant(0.0, 1.0, 3.0, Convention::RightContinuous).unwrap();
        assert_eq!(c.eval(0.5).unwrap(), 3.0);
        assert_eq!(unit_jump(Convention::RightContinuous).eval(0.5).unwrap(), 1.0);
        assert_eq!(unit_jump(Convention::LeftContinuous).eval(0.5).unwrap(), 0.0);
        assert!(matches!(c.eval(1.5), Err(Error::Domain(_))));
        assert!(matches!(c.eval(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn left_limits() {
        let f = unit_jump(Convention::RightContinuous);
        assert_eq!(f.left_limit(0.5).unwrap(), 0.0);
        assert_eq!(f.left_limit(0.75).unwrap(), 1.0);
        let c = StepFn::constant(0.0, 1.0, 2.5, Convention::RightContinuous).unwrap();
        assert_eq!(c.left_limit(0.3).unwrap(), 2.5);
        assert!(c.left_limit(0.0).is_err());
        assert_eq!(ecdf(&[1.0, 2.0, 3.0]).left_limit(2.0).unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn total_variation_examples() {
        assert_eq!(ecdf(&[3.0, 1.0, 2.0]).total_variation(), 1.0);
        let f = StepFn::from_jumps(
            0.0,
            1.0,
            0.0,
            vec![0.2, 0.4],
            &[0.5, -0.25],
            Convention::RightContinuous,
        )
        .unwrap();
        assert_eq!(f.total_variation(), 0.75);
        assert_eq!(
            StepFn::constant(0.0, 1.0, 7.0, Convention::LeftContinuous)
                .unwrap()
                .total_variation(),
            0.0
        );
    }

    #[test]
    fn ls_integral_examples() {
        let one = StepFn::constant(-INF, INF, 1.0, Convention::RightContinuous).unwrap();
        let f = ecdf(&[1.0, 2.0, 3.0]);
        assert_eq!(ls_integral(&one, &f, INF, JumpAtZeroPolicy::OPEN).unwrap(), 1.0);
        let g = ecdf(&[1.0, 2.0]);
        assert_eq!(ls_integral(&g, &g, INF, JumpAtZeroPolicy::OPEN).unwrap(), 0.75);
        let flat = StepFn::constant(-INF, INF, 4.0, Convention::RightContinuous).unwrap();
        assert_eq!(ls_integral(&f, &flat, INF, JumpAtZeroPolicy::OPEN).unwrap(), 0.0);
    }

    #[test]
    fn ls_integral_zero_policy() {
        // f(0) = 0.25 counts as a jump at 0 only under the closed policy.
        let f = StepFn::from_jumps(0.0, 2.0, 0.25, vec![1.0], &[0.5], Convention::RightContinuous).unwrap();
        let g = StepFn::constant(0.0, 2.0, 2.0, Convention::RightContinuous).unwrap();
        assert_eq!(ls_integral(&g, &f, 2.0, JumpAtZeroPolicy::OPEN).unwrap(), 1.0);
        assert_eq!(ls_integral(&g, &f, 2.0, JumpAtZeroPolicy::CLOSED).unwrap(), 1.5);
        assert_eq!(ls_integral(&g, &f, 0.5, JumpAtZeroPolicy::CLOSED).unwrap(), 0.5);
        assert!(ls_integral(&g, &f, 3.0, JumpAtZeroPolicy::OPEN).is_err());
    }

    #[test]
    fn affine_combine_examples() {
        let f = ecdf(&[1.0, 2.0]);
        let zero = affine_combine(&[1.0, -1.0], &[&f, &f]).unwrap();
        assert_eq!(zero.sup_norm(), 0.0);
        let mix = affine_combine(&[0.5, 0.5], &[&ecdf(&[1.0]), &ecdf(&[3.0])]).unwrap();
        assert_eq!(mix.breakpoints(), &[1.0, 3.0]);
        assert_eq!(mix.levels(), &[0.5, 1.0]);
        assert_eq!(affine_combine(&[1.0], &[&f]).unwrap(), f);
        let left = f.with_convention(Convention::LeftContinuous).unwrap();
        assert!(matches!(
            affine_combine(&[1.0, 1.0], &[&f, &left]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn constructor_rejects_bad_breakpoints() {
        let r = StepFn::from_jumps(0.0, 1.0, 0.0, vec![0.5, 0.5], &[1.0, 1.0], Convention::RightContinuous);
        assert!(r.is_err());
        let r = StepFn::from_jumps(0.0, 1.0, 0.0, vec![0.0], &[1.0], Convention::RightContinuous);
        assert!(r.is_err(), "breakpoints must lie in (lo, hi]");
        let r = StepFn::from_jumps(0.0, 1.0, 0.0, vec![1.5], &[1.0], Convention::RightContinuous);
        assert!(r.is_err());
    }

    #[test]
    fn sup_norm_ignores_unattained_left_level() {
        let f = StepFn::from_jumps(0.0, 1.0, 0.0, vec![1.0], &[5.0], Convention::LeftContinuous).unwrap();
        assert_eq!(f.sup_norm(), 0.0);
        assert_eq!(f.with_convention(Convention::RightContinuous).unwrap().sup_norm(), 5.0);
    }

    #[test]
    fn json_round_trip_with_infinite_domain() {
        let f = StepFn::from_levels(
            f64::NEG_INFINITY,
            f64::INFINITY,
            0.0,
            vec![1.0],
            vec![0.5],
            Convention::RightContinuous,
        )
        .unwrap();
        let text = serde_json::to_string(&f).unwrap();
        assert!(text.contains("\"-inf\"") && text.contains("\"inf\""));
        assert_eq!(serde_json::from_str::<StepFn>(&text).unwrap(), f);
        let bad = text.replace("[1.0]", "[2.0,1.0]").replace("[0.5]", "[0.5,0.7]");
        assert!(serde_json::from_str::<StepFn>(&bad).is_err());
    }

    #[test]
    fn text_form_round_trip() {
        let f = StepFn::from_jumps(
            -INF,
            INF,
            0.0,
            vec![-1.5, 2.0],
            &[0.25, 0.75],
            Convention::LeftContinuous,
        )
        .unwrap();
        let text = f.to_text();
        assert!(text.starts_with("-inf inf left 0.0\n"));
        assert_eq!(StepFn::from_text(&text).unwrap(), f);
        assert!(StepFn::from_text("0 1 sideways 0").is_err());
        assert!(StepFn::from_text("0 1 right 0\n0.5").is_err());
    }

    /// Step functions on [0, 8] with dyadic jumps, so sums are exact.
    fn dyadic_fn(conv: Convention) -> impl Strategy<Value = StepFn> {
        (-8i32..8, proptest::collection::btree_map(1u32..64, -16i32..16, 0..10)).prop_map(move |(base, jumps)| {
            let breaks: Vec<f64> = jumps.keys().map(|&k| k as f64 / 8.0).collect();
            let js: Vec<f64> = jumps.values().map(|&j| j as f64 / 4.0).collect();
            StepFn::from_jumps(0.0, 8.0, base as f64 / 2.0, breaks, &js, conv).unwrap()
        })
    }

    proptest! {
        #[test]
        fn affine_combine_is_pointwise_exact(
            f in dyadic_fn(Convention::RightContinuous),
            g in dyadic_fn(Convention::RightContinuous),
            c1 in -3.0f64..3.0,
            c2 in -3.0f64..3.0,
            t in 0.0f64..8.0,
        ) {
            let h = affine_combine(&[c1, c2], &[&f, &g]).unwrap();
            let expected = 0.0 + c1 * f.eval(t).unwrap() + c2 * g.eval(t).unwrap();
            prop_assert_eq!(h.eval(t).unwrap(), expected);
            for &b in h.breakpoints() {
                let e = 0.0 + c1 * f.eval(b).unwrap() + c2 * g.eval(b).unwrap();
                prop_assert_eq!(h.eval(b).unwrap(), e);
            }
            prop_assert!(h.total_variation() <= c1.abs() * f.total_variation() + c2.abs() * g.total_variation() + 1e-12);
        }

        #[test]
        fn integration_by_parts_is_exact(
            a in dyadic_fn(Convention::RightContinuous),
            b in dyadic_fn(Convention::RightContinuous),
            t in 0.0f64..8.0,
        ) {
            let b_left = b.with_convention(Convention::LeftContinuous).unwrap();
            let lhs = ls_integral(&a, &b, t, JumpAtZeroPolicy::OPEN).unwrap()
                + ls_integral(&b_left, &a, t, JumpAtZeroPolicy::OPEN).unwrap();
            let rhs = a.eval(t).unwrap() * b.eval(t).unwrap() - a.base() * b.base();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn ls_integral_is_bilinear_and_additive(
            g1 in dyadic_fn(Convention::RightContinuous),
            g2 in dyadic_fn(Convention::RightContinuous),
            f in dyadic_fn(Convention::RightContinuous),
            m in 0.0f64..8.0,
        ) {
            let g = affine_combine(&[1.0, 2.0], &[&g1, &g2]).unwrap();
            let whole = ls_integral(&g, &f, 8.0, JumpAtZeroPolicy::OPEN).unwrap();
            let parts = ls_integral(&g1, &f, 8.0, JumpAtZeroPolicy::OPEN).unwrap()
                + 2.0 * ls_integral(&g2, &f, 8.0, JumpAtZeroPolicy::OPEN).unwrap();
            prop_assert_eq!(whole, parts);
            let head = ls_integral(&g, &f, m, JumpAtZeroPolicy::OPEN).unwrap();
            let tail: f64 = f.jumps()
                .filter(|&(u, _)| u > m)
                .map(|(u, d)| g.eval(u).unwrap() * d)
                .sum();
            prop_assert_eq!(whole, head + tail);
            let curve = ls_integral_curve(&g, &f, JumpAtZeroPolicy::OPEN).unwrap();
            prop_assert_eq!(curve.eval(m).unwrap(), head);
        }

        #[test]
        fn text_round_trip(f in dyadic_fn(Convention::LeftContinuous)) {
            prop_assert_eq!(StepFn::from_text(&f.to_text()).unwrap(), f);
        }
    }
}
