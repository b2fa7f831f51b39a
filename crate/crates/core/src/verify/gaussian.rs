//! Zero-mean Gaussian vectors with a given covariance, used to simulate grid
//! restrictions of limit processes and to calibrate the tolerance logic.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::resampling::SeedSpec;

use super::config::ToleranceSpec;
use super::stats::{summarize_cells, CellResult, Moments, ReplicateCells};

/// Eigenvalues below this are a contract violation; those in between are clipped to 0.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Sampler holding the symmetric square root of a covariance matrix.
#[derive(Clone, Debug)]
pub struct GaussianSampler {
    root: DMatrix<f64>,
}

impl GaussianSampler {
    pub fn new(cov: &DMatrix<f64>) -> Result<GaussianSampler> {
        if !cov.is_square() {
            return Err(Error::Contract("covariance matrix must be square".into()));
        }
        if cov.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("covariance matrix must be finite".into()));
        }
        let sym = (cov + cov.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        if let Some(&min) = eig.eigenvalues.iter().min_by(|a, b| a.total_cmp(b)) {
            if min < -PSD_TOLERANCE {
                return Err(Error::Contract(format!("covariance matrix has eigenvalue {min}")));
            }
        }
        let top = eig.eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l));
        let floor = f64::EPSILON * cov.nrows() as f64 * top;
        let roots = eig.eigenvalues.map(|l| if l <= floor { 0.0 } else { l.sqrt() });
        let root = &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose();
        Ok(GaussianSampler { root })
    }

    pub fn dim(&self) -> usize {
        self.root.nrows()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z = DVector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|_| rng.sample::<f64, _>(StandardNormal)),
        );
        (&self.root * z).iter().copied().collect()
    }
}

/// One draw of `N(0, cov)` seeded by `seed`.
pub fn simulate_grid_gaussian(cov: &DMatrix<f64>, seed: SeedSpec) -> Result<Vec<f64>> {
    Ok(GaussianSampler::new(cov)?.sample(&mut seed.rng()))
}

/// Self-test of the covariance comparison: `reps` batches of `draws` Gaussian
/// vectors with covariance `cov`, summarized exactly as resampling experiments are.
pub fn gaussian_calibration(
    cov: &DMatrix<f64>,
    draws: usize,
    reps: usize,
    tol: &ToleranceSpec,
    seed: SeedSpec,
) -> Result<Vec<CellResult>> {
    tol.validate()?;
    let sampler = GaussianSampler::new(cov)?;
    let d = sampler.dim();
    let kernel: Vec<f64> = (0..d).flat_map(|a| (0..d).map(move |b| cov[(a, b)])).collect();
    let rep_cells: Vec<ReplicateCells> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let samples: Vec<Vec<f64>> = (0..draws as u64)
                .map(|b| sampler.sample(&mut seed.derive(r, b).rng()))
                .collect();
            ReplicateCells {
                cov: Moments::from_samples(samples).cov,
                kernel: kernel.clone(),
            }
        })
        .collect();
    Ok(summarize_cells(&rep_cells, d, d, tol, |_, _| false))
}
