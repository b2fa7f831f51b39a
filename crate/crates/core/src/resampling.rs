//! Permutation and pooled-bootstrap redistribution of the pooled sample.
//!
//! Every draw is a pure function of a [`SeedSpec`]. Experiments derive one
//! stream per (dataset, draw) pair, so results do not depend on how work is
//! scheduled across threads.

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::empirical::{at_risk_process, ecdf, uncensored_subdist, CensoredObs, PooledData};
use crate::error::{Error, Result};
use crate::stepfn::StepFn;

/// Largest pooled size for which all `N!` permutations are enumerated.
pub const MAX_EXHAUSTIVE_N: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> SeedSpec {
        SeedSpec { master_seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Child stream for item `index` of the sub-experiment labelled `tag`.
    pub fn derive(&self, tag: u64, index: u64) -> SeedSpec {
        SeedSpec {
            master_seed: self.master_seed,
            stream_id: splitmix64(splitmix64(self.stream_id ^ splitmix64(tag)) ^ index),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleKind {
    Permutation,
    PooledBootstrap,
}

/// Zero-based pooled indices; group `j` receives positions
/// `N_{j-1} .. N_j` of `assignment`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResampleDraw {
    pub kind: ResampleKind,
    pub assignment: Vec<usize>,
}

impl ResampleDraw {
    pub fn identity(n: usize) -> ResampleDraw {
        ResampleDraw {
            kind: ResampleKind::Permutation,
            assignment: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }
}

pub fn draw_permutation<T>(data: &PooledData<T>, seed: SeedSpec) -> ResampleDraw {
    let mut assignment: Vec<usize> = (0..data.total()).collect();
    assignment.shuffle(&mut seed.rng());
    ResampleDraw {
        kind: ResampleKind::Permutation,
        assignment,
    }
}

pub fn draw_bootstrap<T>(data: &PooledData<T>, seed: SeedSpec) -> ResampleDraw {
    let n = data.total();
    let mut rng = seed.rng();
    ResampleDraw {
        kind: ResampleKind::PooledBootstrap,
        assignment: (0..n).map(|_| rng.random_range(0..n)).collect(),
    }
}

pub fn draw<T>(kind: ResampleKind, data: &PooledData<T>, seed: SeedSpec) -> ResampleDraw {
    match kind {
        ResampleKind::Permutation => draw_permutation(data, seed),
        ResampleKind::PooledBootstrap => draw_bootstrap(data, seed),
    }
}

/// All `N!` permutations in lexicographic order.
pub fn enumerate_permutations(n: usize) -> Result<impl Iterator<Item = ResampleDraw>> {
    if n > MAX_EXHAUSTIVE_N {
        return Err(Error::Config(format!(
            "exhaustive enumeration needs N <= {MAX_EXHAUSTIVE_N}, got {n}"
        )));
    }
    Ok((0..n).permutations(n).map(|assignment| ResampleDraw {
        kind: ResampleKind::Permutation,
        assignment,
    }))
}

/// Observations each group receives under `draw`.
pub fn resampled_groups<T: Clone>(data: &PooledData<T>, draw: &ResampleDraw) -> Result<Vec<Vec<T>>> {
    if draw.len() != data.total() {
        return Err(Error::Contract(format!(
            "draw of length {} for a pooled sample of size {}",
            draw.len(),
            data.total()
        )));
    }
    if let Some(&bad) = draw.assignment.iter().find(|&&i| i >= data.total()) {
        return Err(Error::Contract(format!("pooled index {bad} out of range")));
    }
    let pooled = data.pooled();
    Ok((0..data.num_groups())
        .map(|j| {
            draw.assignment[data.group_range(j)]
                .iter()
                .map(|&i| pooled[i].clone())
                .collect()
        })
        .collect())
}

/// Group ECDFs `P^π_{j,n_j}` or `P̂_{j,n_j}` of plain data.
pub fn resampled_ecdfs(data: &PooledData<f64>, draw: &ResampleDraw) -> Result<Vec<StepFn>> {
    resampled_groups(data, draw)?.iter().map(|g| ecdf(g)).collect()
}

/// Per-group `(H̄_j, H^uc_j)` of resampled censored pairs.
pub fn resampled_survival_fns(data: &PooledData<CensoredObs>, draw: &ResampleDraw) -> Result<Vec<(StepFn, StepFn)>> {
    resampled_groups(data, draw)?
        .iter()
        .map(|g| Ok((at_risk_process(g)?, uncensored_subdist(g)?)))
        .collect()
}

/// `√N (f_j(t_k) − pooled(t_k))` as an `m × |grid|` matrix.
pub fn centered_process(
    group_fns: &[StepFn],
    pooled_fn: &StepFn,
    n_total: usize,
    grid: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let scale = (n_total as f64).sqrt();
    let pooled: Vec<f64> = grid.iter().map(|&t| pooled_fn.eval(t)).collect::<Result<_>>()?;
    group_fns
        .iter()
        .map(|f| {
            grid.iter()
                .zip(&pooled)
                .map(|(&t, h)| Ok(scale * (f.eval(t)? - h)))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirical::pooled_ecdf;
    use std::collections::HashMap;

    fn pool(groups: &[Vec<f64>]) -> PooledData<f64> {
        PooledData::from_groups(groups).unwrap()
    }

    #[test]
    fn single_observation_draws() {
        let p = PooledData::from_groups(&[vec![7.0]]).unwrap();
        assert_eq!(draw_permutation(&p, SeedSpec::new(1, 2)).assignment, vec![0]);
        assert_eq!(draw_bootstrap(&p, SeedSpec::new(1, 2)).assignment, vec![0]);
    }

    #[test]
    fn draws_are_deterministic() {
        let p = pool(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0]]);
        let s = SeedSpec::new(42, 7);
        assert_eq!(draw_permutation(&p, s), draw_permutation(&p, s));
        assert_eq!(draw_bootstrap(&p, s), draw_bootstrap(&p, s));
        assert_ne!(s.derive(1, 0), s.derive(1, 1));
        assert_ne!(s.derive(1, 0), s.derive(2, 0));
    }

    #[test]
    fn permutation_is_a_bijection() {
        let p = pool(&[vec![0.0; 10], vec![1.0; 7]]);
        for b in 0..50 {
            let mut a = draw_permutation(&p, SeedSpec::new(3, b)).assignment;
            a.sort_unstable();
            assert_eq!(a, (0..17).collect::<Vec<_>>());
        }
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_permutations(4).unwrap().count(), 24);
        assert!(enumerate_permutations(9).is_err());
    }

    #[test]
    fn identity_and_swap_resamples() {
        let p = pool(&[vec![1.0], vec![3.0]]);
        let id = resampled_ecdfs(&p, &ResampleDraw::identity(2)).unwrap();
        assert_eq!(id[0], ecdf(&[1.0]).unwrap());
        assert_eq!(id[1], ecdf(&[3.0]).unwrap());
        let swap = ResampleDraw {
            kind: ResampleKind::Permutation,
            assignment: vec![1, 0],
        };
        let sw = resampled_ecdfs(&p, &swap).unwrap();
        assert_eq!(sw[0], id[1]);
        assert_eq!(sw[1], id[0]);
        let degenerate = ResampleDraw {
            kind: ResampleKind::PooledBootstrap,
            assignment: vec![0, 0],
        };
        let d = resampled_ecdfs(&p, &degenerate).unwrap();
        assert!(d.iter().all(|f| *f == ecdf(&[1.0]).unwrap()));
        let short = ResampleDraw::identity(1);
        assert!(matches!(resampled_ecdfs(&p, &short), Err(Error::Contract(_))));
    }

    #[test]
    fn centered_process_examples() {
        let single = pool(&[vec![1.0, 2.0]]);
        let h = pooled_ecdf(&single).unwrap();
        let fns = resampled_ecdfs(&single, &ResampleDraw::identity(2)).unwrap();
        let z = centered_process(&fns, &h, 2, &[0.5, 1.5, 2.5]).unwrap();
        assert!(z[0].iter().all(|&v| v == 0.0));

        // Pooled (1, 2, 3, 4), groups {1, 2} and {3, 4}; swapping 2 and 3
        // gives groups {1, 3} and {2, 4}. At t = 2.5: F = 1/2, G = 1/2, H = 1/2;
        // at t = 1.5: F = 1/2, G = 0, H = 1/4.
        let p = pool(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let h = pooled_ecdf(&p).unwrap();
        let draw = ResampleDraw {
            kind: ResampleKind::Permutation,
            assignment: vec![0, 2, 1, 3],
        };
        let fns = resampled_ecdfs(&p, &draw).unwrap();
        let z = centered_process(&fns, &h, 4, &[1.5, 2.5]).unwrap();
        assert_eq!(z, vec![vec![0.5, 0.0], vec![-0.5, 0.0]]);
    }

    #[test]
    fn permutation_conserves_the_pool() {
        let p = pool(&[vec![0.3, 1.2, 2.2], vec![0.7, 1.9], vec![2.5, 0.1, 1.4, 3.3]]);
        let h = pooled_ecdf(&p).unwrap();
        let grid: Vec<f64> = (0..40).map(|k| k as f64 * 0.1).collect();
        let fr = p.fractions();
        for b in 0..20 {
            let fns = resampled_ecdfs(&p, &draw_permutation(&p, SeedSpec::new(11, b))).unwrap();
            for &t in &grid {
                let mix: f64 = fns.iter().zip(&fr).map(|(f, w)| w * f.eval(t).unwrap()).sum();
                assert!((mix - h.eval(t).unwrap()).abs() < 1e-15);
            }
        }
    }

    /// Chi-square goodness of fit of the shuffle over all 24 permutations of
    /// N = 4, seed 2024. Critical value of χ²₂₃ at level 0.001 is 49.73.
    #[test]
    fn shuffle_is_uniform_over_permutations() {
        let p = pool(&[vec![0.0, 1.0], vec![2.0, 3.0]]);
        let draws = 24_000u64;
        let mut counts: HashMap<Vec<usize>, u64> = HashMap::new();
        for b in 0..draws {
            let d = draw_permutation(&p, SeedSpec::new(2024, 0).derive(0, b));
            *counts.entry(d.assignment).or_default() += 1;
        }
        assert_eq!(counts.len(), 24);
        let expected = draws as f64 / 24.0;
        let chi2: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 49.73, "chi2 = {chi2}");
    }

    /// Each bootstrap position draws every pooled index with frequency 1/N.
    /// χ²₄ critical value at level 0.001 is 18.47.
    #[test]
    fn bootstrap_marginals_are_uniform() {
        let p = pool(&[vec![0.0, 1.0], vec![2.0, 3.0, 4.0]]);
        let draws = 10_000u64;
        let mut counts = vec![vec![0u64; 5]; 5];
        for b in 0..draws {
            let d = draw_bootstrap(&p, SeedSpec::new(99, 5).derive(1, b));
            for (pos, &i) in d.assignment.iter().enumerate() {
                counts[pos][i] += 1;
            }
        }
        let expected = draws as f64 / 5.0;
        for row in &counts {
            let chi2: f64 = row.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
            assert!(chi2 < 18.47, "chi2 = {chi2}");
        }
        let total: u64 = counts.iter().map(|r| r[2]).sum();
        let mean_multiplicity = total as f64 / draws as f64;
        assert!((mean_multiplicity - 1.0).abs() < 0.03);
    }

    #[test]
    fn survival_resample_pairs_stay_joined() {
        let obs = vec![
            vec![CensoredObs::new(1.0, true), CensoredObs::new(2.0, false)],
            vec![CensoredObs::new(3.0, true)],
        ];
        let p = PooledData::from_groups(&obs).unwrap();
        let draw = ResampleDraw {
            kind: ResampleKind::Permutation,
            assignment: vec![2, 1, 0],
        };
        let groups = resampled_groups(&p, &draw).unwrap();
        assert_eq!(
            groups[0],
            vec![CensoredObs::new(3.0, true), CensoredObs::new(2.0, false)]
        );
        let fns = resampled_survival_fns(&p, &draw).unwrap();
        assert_eq!(fns[1].1.eval(1.0).unwrap(), 1.0);
        assert_eq!(fns[0].0.eval(2.5).unwrap(), 0.5);
    }
}
