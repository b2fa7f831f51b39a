use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::config::ToleranceSpec;

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

pub(crate) fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Mean vector and covariance matrix (divisor `B`) of `B` sample vectors.
///
/// Samples are first put into a canonical order, so the result depends only
/// on the multiset of samples, not on the order they were produced in.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub count: usize,
    pub mean: Vec<f64>,
    /// Row-major `d × d`.
    pub cov: Vec<f64>,
}

impl Moments {
    pub fn from_samples(mut samples: Vec<Vec<f64>>) -> Moments {
        samples.sort_by(|a, b| lexicographic(a, b));
        let count = samples.len();
        let d = samples.first().map_or(0, Vec::len);
        let n = count as f64;
        let mean: Vec<f64> = (0..d)
            .map(|k| compensated_sum(samples.iter().map(|s| s[k])) / n)
            .collect();
        let mut cov = vec![0.0; d * d];
        for a in 0..d {
            for b in a..d {
                let c = compensated_sum(samples.iter().map(|s| (s[a] - mean[a]) * (s[b] - mean[b]))) / n;
                cov[a * d + b] = c;
                cov[b * d + a] = c;
            }
        }
        Moments { count, mean, cov }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn cov_at(&self, a: usize, b: usize) -> f64 {
        self.cov[a * self.dim() + b]
    }
}

/// Mean and standard error of the mean of per-replicate values.
pub(crate) fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let r = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / r;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (r - 1.0);
    (mean, (var / r).sqrt())
}

/// Cellwise comparison of a Monte Carlo covariance with its kernel target,
/// aggregated over replicates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    /// `(group, grid point)` of the row and column.
    pub row: (usize, usize),
    pub col: (usize, usize),
    pub kernel: f64,
    pub mc: f64,
    pub mc_se: f64,
    pub deviation: f64,
    pub se: f64,
    pub threshold: f64,
    pub pass: bool,
    /// For cells whose kernel is identically zero by independence: whether
    /// the Monte Carlo estimate lies within `se_multiplier` standard errors of 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_check: Option<bool>,
}

/// One replicate: covariance estimates and kernel values on the same cells.
pub(crate) struct ReplicateCells {
    pub cov: Vec<f64>,
    pub kernel: Vec<f64>,
}

/// Aggregates replicate cells (upper triangle of a `d × d` layout with
/// `points` grid points per row group).
pub(crate) fn summarize_cells(
    reps: &[ReplicateCells],
    d: usize,
    points: usize,
    tol: &ToleranceSpec,
    structural_zero: impl Fn(usize, usize) -> bool,
) -> Vec<CellResult> {
    let mut out = Vec::new();
    for a in 0..d {
        for b in a..d {
            let idx = a * d + b;
            let covs: Vec<f64> = reps.iter().map(|r| r.cov[idx]).collect();
            let kernels: Vec<f64> = reps.iter().map(|r| r.kernel[idx]).collect();
            let devs: Vec<f64> = reps.iter().map(|r| r.cov[idx] - r.kernel[idx]).collect();
            let (mc, mc_se) = mean_and_se(&covs);
            let (kernel, _) = mean_and_se(&kernels);
            let (deviation, se) = mean_and_se(&devs);
            let threshold = tol.threshold(se);
            let zero_check = structural_zero(a, b).then(|| mc.abs() <= tol.se_multiplier * mc_se);
            out.push(CellResult {
                row: (a / points, a % points),
                col: (b / points, b % points),
                kernel,
                mc,
                mc_se,
                deviation,
                se,
                threshold,
                pass: deviation.abs() <= threshold,
                zero_check,
            });
        }
    }
    out
}
