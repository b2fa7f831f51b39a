//! Conditional covariance and linearization experiments.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::empirical::{MultiSampleData, PooledData};
use crate::error::{Error, Result};
use crate::limits::Variant;
use crate::resampling::{draw, enumerate_permutations, resampled_ecdfs, ResampleDraw, ResampleKind, SeedSpec};

use super::config::ExperimentConfig;
use super::scenario::{groups_at_risk, resolve_tau, Prepared};
use super::stats::{summarize_cells, CellResult, Moments, ReplicateCells};

pub const TAG_DATA: u64 = 1;
pub const TAG_RETRY: u64 = 2;
pub const TAG_PERM: u64 = 3;
pub const TAG_BOOT: u64 = 4;

/// Redraws allowed per dataset before giving up.
pub const MAX_REDRAWS: u64 = 1000;

fn draw_tag(kind: ResampleKind) -> u64 {
    match kind {
        ResampleKind::Permutation => TAG_PERM,
        ResampleKind::PooledBootstrap => TAG_BOOT,
    }
}

fn variant(kind: ResampleKind) -> Variant {
    match kind {
        ResampleKind::Permutation => Variant::Perm,
        ResampleKind::PooledBootstrap => Variant::Boot,
    }
}

/// Results for one resampling scheme.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KindReport {
    pub kind: ResampleKind,
    pub cells: Vec<CellResult>,
    pub max_abs_deviation: f64,
    pub pass_fraction: f64,
    pub all_pass: bool,
    /// Whether every structurally zero cell lies within `se_multiplier`
    /// standard errors of 0 (pooled bootstrap, distinct groups).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_cells_pass: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config: ExperimentConfig,
    /// Seed of each dataset after any redraws.
    pub dataset_seeds: Vec<SeedSpec>,
    /// Datasets redrawn because some group had nobody at risk at `τ`.
    pub redraws: usize,
    /// Grid and `τ` of the first dataset.
    pub grid: Vec<f64>,
    pub tau: Option<f64>,
    pub kinds: Vec<KindReport>,
    pub all_pass: bool,
    /// Wall-clock seconds; not serialized, so reports stay byte-identical.
    #[serde(skip)]
    pub runtime_secs: f64,
}

/// A simulated (or fixed) dataset together with the seed that produced it.
pub(crate) struct Dataset {
    pub data: MultiSampleData,
    pub seed: SeedSpec,
    pub redraws: u64,
}

/// Draws dataset `r`, redrawing with an incremented seed while some group
/// has nobody at risk at `τ`.
pub(crate) fn make_dataset(cfg: &ExperimentConfig, sizes: &[usize], base: SeedSpec, r: u64) -> Result<Dataset> {
    let rep_seed = base.derive(TAG_DATA, r);
    for attempt in 0..MAX_REDRAWS {
        let seed = rep_seed.derive(TAG_RETRY, attempt);
        let data = cfg.dataset(sizes, seed)?;
        if let (MultiSampleData::Survival(groups), Some(spec)) = (&data, cfg.tau) {
            let tau = resolve_tau(spec, groups).map_err(|e| e.context(format!("dataset seed {seed:?}")))?;
            if !groups_at_risk(groups, tau) {
                if cfg.data.is_some() {
                    return Err(Error::Domain(format!(
                        "fixed dataset has a group with nobody at risk at tau = {tau}"
                    )));
                }
                continue;
            }
        }
        return Ok(Dataset {
            data,
            seed,
            redraws: attempt,
        });
    }
    Err(Error::Domain(format!(
        "no admissible dataset after {MAX_REDRAWS} redraws for replicate {r}"
    )))
}

/// Dataset `rep` of the experiment, exactly as the experiments see it.
pub fn simulate_dataset(cfg: &ExperimentConfig, rep: u64) -> Result<MultiSampleData> {
    cfg.validate()?;
    Ok(make_dataset(cfg, &cfg.sizes, cfg.seed, rep)?.data)
}

fn draw_list<T: Sync>(
    cfg: &ExperimentConfig,
    kind: ResampleKind,
    pooled: &PooledData<T>,
    seed: SeedSpec,
) -> Result<Vec<ResampleDraw>> {
    if cfg.exhaustive {
        return Ok(enumerate_permutations(pooled.total())?.collect());
    }
    let tag = draw_tag(kind);
    Ok((0..cfg.draws as u64)
        .into_par_iter()
        .map(|b| draw(kind, pooled, seed.derive(tag, b)))
        .collect())
}

fn draws_for(
    cfg: &ExperimentConfig,
    kind: ResampleKind,
    data: &MultiSampleData,
    seed: SeedSpec,
) -> Result<Vec<ResampleDraw>> {
    match data {
        MultiSampleData::Plain(g) => draw_list(cfg, kind, &PooledData::from_groups(g)?, seed),
        MultiSampleData::Survival(g) => draw_list(cfg, kind, &PooledData::from_groups(g)?, seed),
    }
}

fn statistics(prepared: &Prepared, draws: &[ResampleDraw]) -> Result<Vec<Vec<f64>>> {
    draws.par_iter().map(|d| prepared.statistic(d)).collect()
}

/// Moments of the scenario statistic over an explicit list of draws.
pub fn statistic_moments(cfg: &ExperimentConfig, data: &MultiSampleData, draws: &[ResampleDraw]) -> Result<Moments> {
    let prepared = Prepared::new(cfg, data)?;
    Ok(Moments::from_samples(statistics(&prepared, draws)?))
}

/// Moments of the uncentered group ECDFs `P_j(t)` over an explicit list of draws,
/// laid out row-major as `(group, grid point)`.
pub fn group_ecdf_moments(groups: &[Vec<f64>], grid: &[f64], draws: &[ResampleDraw]) -> Result<Moments> {
    let pooled = PooledData::from_groups(groups)?;
    let samples = draws
        .par_iter()
        .map(|d| {
            let mut row = Vec::with_capacity(groups.len() * grid.len());
            for f in resampled_ecdfs(&pooled, d)? {
                for &t in grid {
                    row.push(f.eval(t)?);
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Moments::from_samples(samples))
}

/// Conditional means of the group ECDFs over all `N!` permutations.
pub fn exhaustive_group_means(groups: &[Vec<f64>], grid: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n: usize = groups.iter().map(Vec::len).sum();
    let draws: Vec<ResampleDraw> = enumerate_permutations(n)?.collect();
    let m = group_ecdf_moments(groups, grid, &draws)?;
    Ok(m.mean.chunks(grid.len()).map(<[f64]>::to_vec).collect())
}

struct RepOutcome {
    seed: SeedSpec,
    redraws: u64,
    grid: Vec<f64>,
    tau: Option<f64>,
    cells: Vec<ReplicateCells>,
    dim: usize,
    points: usize,
    rows: usize,
}

fn run_replicate(cfg: &ExperimentConfig, r: u64) -> Result<RepOutcome> {
    let ds = make_dataset(cfg, &cfg.sizes, cfg.seed, r)?;
    let ctx = format!("dataset seed {:?}", ds.seed);
    let inner = || -> Result<RepOutcome> {
        let prepared = Prepared::new(cfg, &ds.data)?;
        let mut cells = Vec::new();
        for kind in cfg.resample_kind.kinds() {
            let draws = draws_for(cfg, kind, &ds.data, ds.seed)?;
            let moments = Moments::from_samples(statistics(&prepared, &draws)?);
            let mut kernel = prepared.kernel(cfg, variant(kind))?;
            if cfg.exhaustive {
                // Exact finite-N permutation covariance of the linear statistic.
                let n = ds.data.total() as f64;
                kernel.iter_mut().for_each(|v| *v *= n / (n - 1.0));
            }
            cells.push(ReplicateCells {
                cov: moments.cov,
                kernel,
            });
        }
        Ok(RepOutcome {
            seed: ds.seed,
            redraws: ds.redraws,
            grid: prepared.grid.clone(),
            tau: prepared.tau,
            cells,
            dim: prepared.dim(),
            points: prepared.points(),
            rows: prepared.rows(),
        })
    };
    inner().map_err(|e| e.context(&ctx))
}

/// Monte Carlo (or exhaustive) conditional covariance of the scenario
/// statistic, compared cellwise with its kernel and aggregated over datasets.
/// Exhaustive runs compare against the kernel times `N/(N-1)`, the exact
/// permutation covariance of a linear statistic.
pub fn conditional_cov_experiment(cfg: &ExperimentConfig) -> Result<VerifyReport> {
    cfg.validate()?;
    let start = std::time::Instant::now();
    let reps = if cfg.data.is_some() { 1 } else { cfg.outer_reps };
    let outcomes = (0..reps as u64)
        .into_par_iter()
        .map(|r| run_replicate(cfg, r))
        .collect::<Result<Vec<_>>>()?;
    let first = &outcomes[0];
    let (d, points, rows) = (first.dim, first.points, first.rows);
    let mut kinds = Vec::new();
    for (k, kind) in cfg.resample_kind.kinds().into_iter().enumerate() {
        let rep_cells: Vec<ReplicateCells> = outcomes
            .iter()
            .map(|o| ReplicateCells {
                cov: o.cells[k].cov.clone(),
                kernel: o.cells[k].kernel.clone(),
            })
            .collect();
        let boot = kind == ResampleKind::PooledBootstrap;
        let cells = summarize_cells(&rep_cells, d, points, &cfg.tolerance, |a, b| {
            boot && rows > 1 && a / points != b / points
        });
        let max_abs_deviation = cells.iter().map(|c| c.deviation.abs()).fold(0.0, f64::max);
        let passed = cells.iter().filter(|c| c.pass).count();
        let zero: Vec<bool> = cells.iter().filter_map(|c| c.zero_check).collect();
        let zero_cells_pass = (!zero.is_empty()).then(|| zero.iter().all(|&z| z));
        kinds.push(KindReport {
            kind,
            max_abs_deviation,
            pass_fraction: passed as f64 / cells.len() as f64,
            all_pass: passed == cells.len() && zero_cells_pass != Some(false),
            zero_cells_pass,
            cells,
        });
    }
    Ok(VerifyReport {
        config: cfg.clone(),
        dataset_seeds: outcomes.iter().map(|o| o.seed).collect(),
        redraws: outcomes.iter().map(|o| o.redraws as usize).sum(),
        grid: first.grid.clone(),
        tau: first.tau,
        all_pass: kinds.iter().all(|k| k.all_pass),
        kinds,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

/// Kernel matrices of the scenario statistic on one dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    pub config: ExperimentConfig,
    pub dataset_seed: SeedSpec,
    pub grid: Vec<f64>,
    pub tau: Option<f64>,
    /// `(group, grid point)` label of each row and column.
    pub index: Vec<(usize, usize)>,
    pub kernels: Vec<KernelMatrix>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelMatrix {
    pub kind: ResampleKind,
    pub matrix: Vec<Vec<f64>>,
    pub min_eigenvalue: f64,
}

/// Kernel matrices (plug-in or analytic target, per the config) for the first
/// dataset of the experiment.
pub fn kernel_report(cfg: &ExperimentConfig) -> Result<KernelReport> {
    cfg.validate()?;
    let ds = make_dataset(cfg, &cfg.sizes, cfg.seed, 0)?;
    let ctx = format!("dataset seed {:?}", ds.seed);
    let inner = || -> Result<KernelReport> {
        let prepared = Prepared::new(cfg, &ds.data)?;
        let d = prepared.dim();
        let points = prepared.points();
        let kernels = cfg
            .resample_kind
            .kinds()
            .into_iter()
            .map(|kind| {
                let flat = prepared.kernel(cfg, variant(kind))?;
                let m = nalgebra::DMatrix::from_row_slice(d, d, &flat);
                Ok(KernelMatrix {
                    kind,
                    matrix: flat.chunks(d).map(<[f64]>::to_vec).collect(),
                    min_eigenvalue: crate::limits::min_eigenvalue(&m),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(KernelReport {
            config: cfg.clone(),
            dataset_seed: ds.seed,
            grid: prepared.grid.clone(),
            tau: prepared.tau,
            index: (0..d).map(|a| (a / points, a % points)).collect(),
            kernels,
        })
    };
    inner().map_err(|e| e.context(&ctx))
}

/// Residual quantiles at one total sample size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderEntry {
    pub total: usize,
    pub sizes: Vec<usize>,
    pub kind: ResampleKind,
    pub count: usize,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q90: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearizationReport {
    pub config: ExperimentConfig,
    pub entries: Vec<LadderEntry>,
    pub redraws: usize,
    #[serde(skip)]
    pub runtime_secs: f64,
}

/// Linear-interpolation quantile of sorted values.
pub(crate) fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Group sizes proportional to `sizes` summing to `total`.
pub fn scaled_sizes(sizes: &[usize], total: usize) -> Vec<usize> {
    let base: usize = sizes.iter().sum();
    let mut out: Vec<usize> = sizes.iter().map(|&n| n * total / base).collect();
    let short = total - out.iter().sum::<usize>();
    for k in 0..short {
        let j = k % out.len();
        out[j] += 1;
    }
    out
}

/// `sup`-norm linearization residuals of the scenario functional for every
/// draw, summarized by quantiles at each size in the ladder.
pub fn linearization_residual_experiment(cfg: &ExperimentConfig) -> Result<LinearizationReport> {
    cfg.validate()?;
    let start = std::time::Instant::now();
    let ladder = match (&cfg.size_ladder, &cfg.data) {
        (Some(l), None) => l.clone(),
        _ => vec![cfg.total()],
    };
    let reps = if cfg.data.is_some() { 1 } else { cfg.outer_reps };
    let mut entries = Vec::new();
    let mut redraws = 0;
    for (level, &total) in ladder.iter().enumerate() {
        let sizes = if cfg.data.is_some() {
            cfg.sizes.clone()
        } else {
            scaled_sizes(&cfg.sizes, total)
        };
        let level_seed = cfg.seed.derive(TAG_DATA, 1 << 32 | level as u64);
        let per_rep = (0..reps as u64)
            .into_par_iter()
            .map(|r| {
                let ds = make_dataset(cfg, &sizes, level_seed, r)?;
                let ctx = format!("dataset seed {:?}", ds.seed);
                let inner = || -> Result<Vec<Vec<f64>>> {
                    let prepared = Prepared::new(cfg, &ds.data)?;
                    cfg.resample_kind
                        .kinds()
                        .into_iter()
                        .map(|kind| {
                            let draws = draws_for(cfg, kind, &ds.data, ds.seed)?;
                            draws.par_iter().map(|d| prepared.linearization_residual(d)).collect()
                        })
                        .collect()
                };
                Ok((ds.redraws as usize, inner().map_err(|e| e.context(&ctx))?))
            })
            .collect::<Result<Vec<_>>>()?;
        redraws += per_rep.iter().map(|p| p.0).sum::<usize>();
        for (k, kind) in cfg.resample_kind.kinds().into_iter().enumerate() {
            let mut all: Vec<f64> = per_rep.iter().flat_map(|p| p.1[k].iter().copied()).collect();
            all.sort_by(f64::total_cmp);
            entries.push(LadderEntry {
                total,
                sizes: sizes.clone(),
                kind,
                count: all.len(),
                q25: sorted_quantile(&all, 0.25),
                median: sorted_quantile(&all, 0.5),
                q75: sorted_quantile(&all, 0.75),
                q90: sorted_quantile(&all, 0.9),
                max: all[all.len() - 1],
            });
        }
    }
    Ok(LinearizationReport {
        config: cfg.clone(),
        entries,
        redraws,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}
