use serde::{Deserialize, Serialize};

use crate::empirical::{CensoredObs, MultiSampleData};
use crate::error::{Error, Result};
use crate::laws::Law;
use crate::resampling::{ResampleKind, SeedSpec, MAX_EXHAUSTIVE_N};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    PlainIndicator,
    SurvivalNa,
    SurvivalKm,
    WilcoxonStat,
    Rmst,
}

impl Scenario {
    pub fn is_survival(self) -> bool {
        matches!(self, Scenario::SurvivalNa | Scenario::SurvivalKm | Scenario::Rmst)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpec {
    Explicit(Vec<f64>),
    /// Quantiles 0.1, …, 0.9 of the pooled observations, clipped to the
    /// pooled 5% and 95% quantiles (and to `[0, τ]` for survival data).
    PooledDeciles,
    /// Multiples of `τ`.
    TauFractions(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauSpec {
    Fixed(f64),
    /// Quantile of the pooled observation times.
    PooledQuantile(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleChoice {
    Perm,
    Boot,
    Both,
}

impl ResampleChoice {
    pub fn kinds(self) -> Vec<ResampleKind> {
        match self {
            ResampleChoice::Perm => vec![ResampleKind::Permutation],
            ResampleChoice::Boot => vec![ResampleKind::PooledBootstrap],
            ResampleChoice::Both => vec![ResampleKind::Permutation, ResampleKind::PooledBootstrap],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// Kernel evaluated at the pooled empirical quantities of each dataset.
    #[default]
    PlugIn,
    /// Kernel evaluated at the analytic limit population.
    Analytic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSpec {
    pub abs_tol: f64,
    pub se_multiplier: f64,
}

impl ToleranceSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !(self.se_multiplier >= 2.0) {
            return Err(Error::Config(format!(
                "tolerance needs abs_tol > 0 and se_multiplier >= 2, got {} and {}",
                self.abs_tol, self.se_multiplier
            )));
        }
        Ok(())
    }

    pub fn threshold(&self, se: f64) -> f64 {
        self.abs_tol.max(self.se_multiplier * se)
    }

    pub fn passes(&self, deviation: f64, se: f64) -> bool {
        deviation.abs() <= self.threshold(se)
    }
}

fn default_tolerance() -> ToleranceSpec {
    ToleranceSpec {
        abs_tol: 0.02,
        se_multiplier: 4.0,
    }
}

fn default_grid() -> GridSpec {
    GridSpec::PooledDeciles
}

fn default_reps() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// One law per group; ignored when `data` is given.
    #[serde(default)]
    pub group_laws: Vec<Law>,
    /// Optional censoring law per group (survival scenarios).
    #[serde(default)]
    pub censoring_laws: Option<Vec<Option<Law>>>,
    pub sizes: Vec<usize>,
    #[serde(default = "default_grid")]
    pub grid: GridSpec,
    #[serde(default)]
    pub tau: Option<TauSpec>,
    pub draws: usize,
    #[serde(default = "default_reps")]
    pub outer_reps: usize,
    pub resample_kind: ResampleChoice,
    pub seed: SeedSpec,
    #[serde(default = "default_tolerance")]
    pub tolerance: ToleranceSpec,
    #[serde(default)]
    pub target: Target,
    /// Enumerate all permutations instead of sampling (`N ≤ 8`).
    #[serde(default)]
    pub exhaustive: bool,
    /// Fixed dataset used instead of simulation.
    #[serde(default)]
    pub data: Option<MultiSampleData>,
    /// Total sample sizes for the linearization experiment; group sizes are
    /// scaled in proportion to `sizes`.
    #[serde(default)]
    pub size_ladder: Option<Vec<usize>>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn num_groups(&self) -> usize {
        self.sizes.len()
    }

    pub fn total(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.sizes.len();
        if m < 2 {
            return Err(Error::Config("need at least two groups".into()));
        }
        if let Some(data) = &self.data {
            if data.sizes() != self.sizes {
                return Err(Error::Config("sizes must match the fixed dataset".into()));
            }
            let survival_data = matches!(data, MultiSampleData::Survival(_));
            if survival_data != self.scenario.is_survival() {
                return Err(Error::Config("dataset mode does not match the scenario".into()));
            }
        } else {
            if self.sizes.iter().any(|&n| n < 2) {
                return Err(Error::Config("every group needs at least 2 observations".into()));
            }
            if self.group_laws.len() != m {
                return Err(Error::Config(format!(
                    "expected {m} group laws, got {}",
                    self.group_laws.len()
                )));
            }
            for law in &self.group_laws {
                law.validate()?;
            }
        }
        if let Some(c) = &self.censoring_laws {
            if c.len() != m {
                return Err(Error::Config(format!(
                    "expected {m} censoring entries, got {}",
                    c.len()
                )));
            }
            for law in c.iter().flatten() {
                law.validate()?;
            }
        }
        if self.scenario == Scenario::WilcoxonStat && m != 2 {
            return Err(Error::Config(
                "the Wilcoxon scenario compares exactly two groups".into(),
            ));
        }
        if self.scenario.is_survival() && self.tau.is_none() {
            return Err(Error::Config("survival scenarios need tau".into()));
        }
        match self.tau {
            Some(TauSpec::Fixed(t)) if !(t > 0.0 && t.is_finite()) => {
                return Err(Error::Config(format!("tau must be positive, got {t}")));
            }
            Some(TauSpec::PooledQuantile(p)) if !(p > 0.0 && p < 1.0) => {
                return Err(Error::Config(format!("tau quantile must lie in (0, 1), got {p}")));
            }
            _ => {}
        }
        match &self.grid {
            GridSpec::Explicit(g) | GridSpec::TauFractions(g) if g.is_empty() => {
                return Err(Error::Config("grid is empty".into()));
            }
            GridSpec::Explicit(g) if g.iter().any(|x| !x.is_finite()) => {
                return Err(Error::Config("grid points must be finite".into()));
            }
            GridSpec::TauFractions(g) if g.iter().any(|&x| !(0.0..=1.0).contains(&x)) => {
                return Err(Error::Config("tau fractions must lie in [0, 1]".into()));
            }
            GridSpec::TauFractions(_) if !self.scenario.is_survival() => {
                return Err(Error::Config("tau fractions need a survival scenario".into()));
            }
            _ => {}
        }
        if self.exhaustive {
            if self.resample_kind != ResampleChoice::Perm {
                return Err(Error::Config("exhaustive mode enumerates permutations only".into()));
            }
            if self.total() > MAX_EXHAUSTIVE_N {
                return Err(Error::Config(format!(
                    "exhaustive mode needs N <= {MAX_EXHAUSTIVE_N}, got {}",
                    self.total()
                )));
            }
        } else if self.draws < 100 {
            return Err(Error::Config(format!("need at least 100 draws, got {}", self.draws)));
        }
        if self.outer_reps == 0 {
            return Err(Error::Config("outer_reps must be positive".into()));
        }
        if self.target == Target::Analytic {
            if self.data.is_some() {
                return Err(Error::Config("analytic targets need simulated data".into()));
            }
            if matches!(self.scenario, Scenario::WilcoxonStat | Scenario::Rmst) {
                return Err(Error::Config(
                    "analytic targets are available for indicator, NA and KM scenarios".into(),
                ));
            }
            if self.scenario.is_survival() && !matches!(self.tau, Some(TauSpec::Fixed(_))) {
                return Err(Error::Config("analytic survival targets need a fixed tau".into()));
            }
        }
        self.tolerance.validate()?;
        if let Some(ladder) = &self.size_ladder {
            if ladder.is_empty() || ladder.iter().any(|&n| n < 2 * m) {
                return Err(Error::Config(
                    "size ladder entries must allow 2 observations per group".into(),
                ));
            }
        }
        Ok(())
    }

    /// Simulates a dataset with group sizes `sizes`, or returns the fixed one.
    pub(crate) fn dataset(&self, sizes: &[usize], seed: SeedSpec) -> Result<MultiSampleData> {
        if let Some(data) = &self.data {
            return Ok(data.clone());
        }
        let mut rng = seed.rng();
        if self.scenario.is_survival() {
            let groups = sizes
                .iter()
                .enumerate()
                .map(|(j, &n)| {
                    let cens = self.censoring_laws.as_ref().and_then(|c| c[j].as_ref());
                    (0..n)
                        .map(|_| {
                            let x = self.group_laws[j].sample(&mut rng);
                            match cens {
                                Some(c) => {
                                    let c = c.sample(&mut rng);
                                    CensoredObs::new(x.min(c), x <= c)
                                }
                                None => CensoredObs::new(x, true),
                            }
                        })
                        .collect()
                })
                .collect();
            MultiSampleData::survival(groups)
        } else {
            let groups = sizes
                .iter()
                .enumerate()
                .map(|(j, &n)| self.group_laws[j].sample_n(n, &mut rng))
                .collect();
            MultiSampleData::plain(groups)
        }
    }
}
