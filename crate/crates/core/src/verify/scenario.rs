//! Per-dataset statistics, kernel targets and linearization residuals.

use crate::empirical::{ecdf, pooled_ecdf, CensoredObs, LambdaVector, MultiSampleData, PooledData};
use crate::error::{Error, Result};
use crate::functionals::{
    kaplan_meier, kaplan_meier_derivative, nelson_aalen, nelson_aalen_derivative, quantile, rmst, wilcoxon_curve,
    wilcoxon_derivative, HazardBundle, QuantileProblem,
};
use crate::laws::Law;
use crate::limits::{
    coeff, kernel_value, AnalyticSurvival, EmpiricalSurvival, KernelKind, PlainSource, PooledPopulation,
    SurvivalSource, Variant,
};
use crate::resampling::{resampled_ecdfs, resampled_survival_fns, ResampleDraw};
use crate::stepfn::{affine_combine, StepFn};

use super::config::{ExperimentConfig, GridSpec, Scenario, Target, TauSpec};

enum Pool {
    Plain {
        data: PooledData<f64>,
        pooled: StepFn,
    },
    Survival {
        data: PooledData<CensoredObs>,
        bundle: HazardBundle,
        source: EmpiricalSurvival,
    },
}

/// A dataset with its pooled quantities, grid and `τ`.
pub(crate) struct Prepared {
    scenario: Scenario,
    pool: Pool,
    pub grid: Vec<f64>,
    pub tau: Option<f64>,
    lambdas: LambdaVector,
    scale: f64,
    /// Pooled functional values on the grid (one row).
    pooled_values: Vec<f64>,
}

fn pooled_quantile(values: &[f64], p: f64) -> Result<f64> {
    quantile(&QuantileProblem::new(ecdf(values)?, p)?)
}

fn deciles(values: &[f64]) -> Result<Vec<f64>> {
    let lo = pooled_quantile(values, 0.05)?;
    let hi = pooled_quantile(values, 0.95)?;
    (1..=9)
        .map(|k| Ok(pooled_quantile(values, f64::from(k) / 10.0)?.clamp(lo, hi)))
        .collect()
}

/// True when every group has an observation at or beyond `τ`.
pub(crate) fn groups_at_risk(groups: &[Vec<CensoredObs>], tau: f64) -> bool {
    groups.iter().all(|g| g.iter().any(|o| o.time >= tau))
}

pub(crate) fn resolve_tau(spec: TauSpec, groups: &[Vec<CensoredObs>]) -> Result<f64> {
    match spec {
        TauSpec::Fixed(t) => Ok(t),
        TauSpec::PooledQuantile(p) => {
            let times: Vec<f64> = groups.iter().flatten().map(|o| o.time).collect();
            pooled_quantile(&times, p)
        }
    }
}

impl Prepared {
    pub(crate) fn new(cfg: &ExperimentConfig, data: &MultiSampleData) -> Result<Prepared> {
        let lambdas = LambdaVector::from_sizes(&data.sizes())?;
        let scale = (data.total() as f64).sqrt();
        let (pool, tau, grid) = match data {
            MultiSampleData::Plain(groups) => {
                let pd = PooledData::from_groups(groups)?;
                let pooled = pooled_ecdf(&pd)?;
                let grid = match &cfg.grid {
                    GridSpec::Explicit(g) => g.clone(),
                    GridSpec::PooledDeciles => deciles(pd.pooled())?,
                    GridSpec::TauFractions(_) => return Err(Error::Config("tau fractions need survival data".into())),
                };
                (Pool::Plain { data: pd, pooled }, None, grid)
            }
            MultiSampleData::Survival(groups) => {
                let spec = cfg
                    .tau
                    .ok_or_else(|| Error::Config("survival scenarios need tau".into()))?;
                let tau = resolve_tau(spec, groups)?;
                if !groups_at_risk(groups, tau) {
                    return Err(Error::Domain(format!("some group has nobody at risk at tau = {tau}")));
                }
                let pd = PooledData::from_groups(groups)?;
                let bundle = HazardBundle::from_sample(pd.pooled(), tau)?;
                let source = EmpiricalSurvival::new(bundle.clone())?;
                let grid = match &cfg.grid {
                    GridSpec::Explicit(g) => g.clone(),
                    GridSpec::TauFractions(f) => f.iter().map(|x| x * tau).collect(),
                    GridSpec::PooledDeciles => {
                        let times: Vec<f64> = pd.pooled().iter().map(|o| o.time).collect();
                        deciles(&times)?.into_iter().map(|t| t.min(tau)).collect()
                    }
                };
                if let Some(&bad) = grid.iter().find(|&&t| !(0.0..=tau).contains(&t)) {
                    return Err(Error::Config(format!("grid point {bad} outside [0, {tau}]")));
                }
                (
                    Pool::Survival {
                        data: pd,
                        bundle,
                        source,
                    },
                    Some(tau),
                    grid,
                )
            }
        };
        let mut prepared = Prepared {
            scenario: cfg.scenario,
            pool,
            grid,
            tau,
            lambdas,
            scale,
            pooled_values: Vec::new(),
        };
        prepared.pooled_values = prepared.pooled_row()?;
        Ok(prepared)
    }

    pub(crate) fn points(&self) -> usize {
        if self.scenario == Scenario::Rmst {
            1
        } else {
            self.grid.len()
        }
    }

    pub(crate) fn rows(&self) -> usize {
        if self.scenario == Scenario::WilcoxonStat {
            1
        } else {
            self.lambdas.len()
        }
    }

    pub(crate) fn dim(&self) -> usize {
        self.rows() * self.points()
    }

    fn eval_grid(&self, f: &StepFn) -> Result<Vec<f64>> {
        self.grid.iter().map(|&t| f.eval(t)).collect()
    }

    fn survival_row(&self, bundle: &HazardBundle) -> Result<Vec<f64>> {
        match self.scenario {
            Scenario::SurvivalNa => self.eval_grid(&nelson_aalen(bundle)?),
            Scenario::SurvivalKm => self.eval_grid(&kaplan_meier(bundle)?),
            Scenario::Rmst => Ok(vec![rmst(&kaplan_meier(bundle)?, bundle.tau)?]),
            _ => Err(Error::Contract("not a survival scenario".into())),
        }
    }

    fn pooled_row(&self) -> Result<Vec<f64>> {
        match (&self.pool, self.scenario) {
            (Pool::Plain { pooled, .. }, Scenario::PlainIndicator) => self.eval_grid(pooled),
            (Pool::Plain { pooled, .. }, Scenario::WilcoxonStat) => self.eval_grid(&wilcoxon_curve(pooled, pooled)?),
            (Pool::Survival { bundle, .. }, _) => self.survival_row(bundle),
            _ => Err(Error::Contract("scenario does not match the data".into())),
        }
    }

    fn group_bundles(&self, draw: &ResampleDraw) -> Result<Vec<HazardBundle>> {
        let Pool::Survival { data, bundle, .. } = &self.pool else {
            return Err(Error::Contract("not survival data".into()));
        };
        resampled_survival_fns(data, draw)?
            .into_iter()
            .map(|(r, u)| HazardBundle::new(r, u, bundle.tau))
            .collect()
    }

    /// Rows of unscaled resampled functional values on the grid.
    fn resampled_rows(&self, draw: &ResampleDraw) -> Result<Vec<Vec<f64>>> {
        match &self.pool {
            Pool::Plain { data, .. } => {
                let fns = resampled_ecdfs(data, draw)?;
                match self.scenario {
                    Scenario::PlainIndicator => fns.iter().map(|f| self.eval_grid(f)).collect(),
                    Scenario::WilcoxonStat => Ok(vec![self.eval_grid(&wilcoxon_curve(&fns[0], &fns[1])?)?]),
                    _ => Err(Error::Contract("scenario does not match the data".into())),
                }
            }
            Pool::Survival { .. } => self.group_bundles(draw)?.iter().map(|b| self.survival_row(b)).collect(),
        }
    }

    /// `√N (φ(resampled) − φ(pooled))`, flattened row-major.
    pub(crate) fn statistic(&self, draw: &ResampleDraw) -> Result<Vec<f64>> {
        let s = self.scale;
        Ok(self
            .resampled_rows(draw)?
            .iter()
            .flat_map(|row| row.iter().zip(&self.pooled_values).map(move |(v, h)| s * v - s * h))
            .collect())
    }

    fn plain_population(&self, cfg: &ExperimentConfig) -> Result<PooledPopulation> {
        let Pool::Plain { pooled, .. } = &self.pool else {
            return Err(Error::Contract("not plain data".into()));
        };
        let source = match cfg.target {
            Target::PlugIn => PlainSource::Empirical(pooled.clone()),
            Target::Analytic => PlainSource::Mixture(cfg.group_laws.clone()),
        };
        PooledPopulation::plain(source, self.lambdas.clone())
    }

    fn survival_population(&self, cfg: &ExperimentConfig) -> Result<PooledPopulation> {
        let Pool::Survival { source, .. } = &self.pool else {
            return Err(Error::Contract("not survival data".into()));
        };
        let src: Box<dyn SurvivalSource> = match cfg.target {
            Target::PlugIn => Box::new(source.clone()),
            Target::Analytic => {
                let cens: Vec<Option<Law>> = cfg
                    .censoring_laws
                    .clone()
                    .unwrap_or_else(|| vec![None; self.lambdas.len()]);
                Box::new(AnalyticSurvival::new(
                    cfg.group_laws.clone(),
                    cens,
                    self.lambdas.clone(),
                    self.tau.expect("survival data has tau"),
                )?)
            }
        };
        Ok(PooledPopulation::survival(src, self.lambdas.clone()))
    }

    /// Kernel target on the `d × d` layout of [`Prepared::statistic`].
    pub(crate) fn kernel(&self, cfg: &ExperimentConfig, variant: Variant) -> Result<Vec<f64>> {
        let d = self.dim();
        let g = self.points();
        let mut out = vec![0.0; d * d];
        match self.scenario {
            Scenario::PlainIndicator | Scenario::SurvivalNa | Scenario::SurvivalKm => {
                let kind = match (self.scenario, variant) {
                    (Scenario::PlainIndicator, Variant::Perm) => KernelKind::PermIndicator,
                    (Scenario::PlainIndicator, Variant::Boot) => KernelKind::BootIndicator,
                    (Scenario::SurvivalNa, Variant::Perm) => KernelKind::PermSurvivalNa,
                    (Scenario::SurvivalNa, Variant::Boot) => KernelKind::BootSurvivalNa,
                    (_, Variant::Perm) => KernelKind::PermKm,
                    (_, Variant::Boot) => KernelKind::BootKm,
                };
                let pop = if self.scenario == Scenario::PlainIndicator {
                    self.plain_population(cfg)?
                } else {
                    self.survival_population(cfg)?
                };
                for a in 0..d {
                    for b in a..d {
                        let v = kernel_value(kind, &pop, a / g, b / g, self.grid[a % g], self.grid[b % g])?;
                        out[a * d + b] = v;
                        out[b * d + a] = v;
                    }
                }
            }
            Scenario::WilcoxonStat => {
                let Pool::Plain { pooled, .. } = &self.pool else {
                    return Err(Error::Contract("not plain data".into()));
                };
                let weights = wilcoxon_weights(pooled, &self.grid)?;
                let masses: Vec<f64> = pooled.jumps().map(|(_, p)| p).collect();
                for a in 0..g {
                    for b in a..g {
                        let mut v = 0.0;
                        for i in 0..2 {
                            for j in 0..2 {
                                let c = coeff(variant, &self.lambdas, i, j)?;
                                if c != 0.0 {
                                    v += c * bridge_form(&weights[i][a], &weights[j][b], &masses);
                                }
                            }
                        }
                        out[a * d + b] = v;
                        out[b * d + a] = v;
                    }
                }
            }
            Scenario::Rmst => {
                let Pool::Survival { source, .. } = &self.pool else {
                    return Err(Error::Contract("not survival data".into()));
                };
                let base = rmst_kernel_base(source)?;
                for i in 0..d {
                    for j in 0..d {
                        out[i * d + j] = coeff(variant, &self.lambdas, i, j)? * base;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `sup |√N(φ(resampled) − φ(pooled)) − φ'_{pooled}(√N(resampled − pooled))|`.
    pub(crate) fn linearization_residual(&self, draw: &ResampleDraw) -> Result<f64> {
        let s = self.scale;
        let lhs = self.statistic(draw)?;
        let rhs: Vec<f64> = match &self.pool {
            Pool::Plain { data, pooled } => {
                let fns = resampled_ecdfs(data, draw)?;
                let dirs = fns
                    .iter()
                    .map(|f| affine_combine(&[s, -s], &[f, pooled]))
                    .collect::<Result<Vec<_>>>()?;
                match self.scenario {
                    Scenario::PlainIndicator => {
                        let mut v = Vec::new();
                        for d in &dirs {
                            v.extend(self.eval_grid(d)?);
                        }
                        v
                    }
                    _ => self.eval_grid(&wilcoxon_derivative(pooled, pooled, &dirs[0], &dirs[1])?)?,
                }
            }
            Pool::Survival { bundle, .. } => {
                let mut v = Vec::new();
                for b in self.group_bundles(draw)? {
                    let alpha = affine_combine(&[s, -s], &[&b.at_risk, &bundle.at_risk])?;
                    let beta = affine_combine(&[s, -s], &[&b.uncensored, &bundle.uncensored])?;
                    match self.scenario {
                        Scenario::SurvivalNa => {
                            v.extend(self.eval_grid(&nelson_aalen_derivative(bundle, &alpha, &beta)?)?)
                        }
                        Scenario::SurvivalKm => {
                            v.extend(self.eval_grid(&kaplan_meier_derivative(bundle, &alpha, &beta)?)?)
                        }
                        _ => v.push(rmst(&kaplan_meier_derivative(bundle, &alpha, &beta)?, bundle.tau)?),
                    }
                }
                v
            }
        };
        Ok(lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }
}

/// Weights `w_i^t(l)` of the Wilcoxon derivative written as
/// `Σ_l w_0^t(l) ΔG_0(x_l) + Σ_l w_1^t(l) ΔG_1(x_l)` over the atoms `x_l` of `H`:
/// `w_0^t(l) = 1{x_l ≤ t}(H(t) − H(x_l−))` and `w_1^t(l) = 1{x_l ≤ t} H(x_l)`.
fn wilcoxon_weights(pooled: &StepFn, grid: &[f64]) -> Result<[Vec<Vec<f64>>; 2]> {
    let atoms = pooled.breakpoints();
    let mut w0 = Vec::with_capacity(grid.len());
    let mut w1 = Vec::with_capacity(grid.len());
    for &t in grid {
        let ht = pooled.eval(t)?;
        let mut a = Vec::with_capacity(atoms.len());
        let mut b = Vec::with_capacity(atoms.len());
        for (k, &x) in atoms.iter().enumerate() {
            if x <= t {
                a.push(ht - pooled.level_before(k));
                b.push(pooled.levels()[k]);
            } else {
                a.push(0.0);
                b.push(0.0);
            }
        }
        w0.push(a);
        w1.push(b);
    }
    Ok([w0, w1])
}

/// Covariance of `Σ w ΔG` and `Σ v ΔG` for an `H`-bridge with atom masses `p`:
/// `Σ w v p − (Σ w p)(Σ v p)`.
fn bridge_form(w: &[f64], v: &[f64], p: &[f64]) -> f64 {
    let wv: f64 = w.iter().zip(v).zip(p).map(|((a, b), c)| a * b * c).sum();
    let wp: f64 = w.iter().zip(p).map(|(a, c)| a * c).sum();
    let vp: f64 = v.iter().zip(p).map(|(b, c)| b * c).sum();
    wv - wp * vp
}

/// `∫_0^τ ∫_0^τ S(s)S(t) K(min{s,t}) ds dt` with `K(u) = ∫_[0,u] 1/((1 − ΔΛ)H̄) dΛ`,
/// summed exactly over the intervals on which `S` and `K` are constant.
fn rmst_kernel_base(source: &EmpiricalSurvival) -> Result<f64> {
    let tau = source.tau();
    let lambda = nelson_aalen(source.bundle())?;
    let mut knots = vec![0.0];
    knots.extend(lambda.breakpoints().iter().copied().filter(|&u| u > 0.0 && u < tau));
    knots.push(tau);
    let mut pieces = Vec::with_capacity(knots.len() - 1);
    for w in knots.windows(2) {
        let len = w[1] - w[0];
        pieces.push((len * source.survival(w[0])?, source.km_integral(w[0])?));
    }
    // Σ_a Σ_b m_a m_b K_{min(a,b)} = Σ_a K_a (m_a² + 2 m_a Σ_{b>a} m_b)
    let mut suffix = 0.0;
    let mut total = 0.0;
    for &(m, k) in pieces.iter().rev() {
        total += k * (m * m + 2.0 * m * suffix);
        suffix += m;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmst_kernel_base_by_hand() {
        // One event at 1 among 2 at risk; τ = 2.
        // S = 1 on [0,1), 1/2 on [1,2); K = 0 on [0,1), (1/2)/((1/2)·1) = 1 on [1,2).
        // ∫∫ S S K(min) = (1/2)(1/2)·1·1 = 1/4 from the square [1,2)².
        let obs = vec![CensoredObs::new(1.0, true), CensoredObs::new(3.0, false)];
        let src = EmpiricalSurvival::new(HazardBundle::from_sample(&obs, 2.0).unwrap()).unwrap();
        assert!((rmst_kernel_base(&src).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn bridge_form_is_a_variance() {
        let p = [0.25, 0.25, 0.5];
        let w = [1.0, 0.0, 0.0];
        assert_eq!(bridge_form(&w, &w, &p), 0.25 - 0.0625);
    }
}
