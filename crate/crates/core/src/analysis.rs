//! Descriptive summaries of a multi-sample dataset: ECDFs and the Wilcoxon
//! functional for plain data; Nelson-Aalen, Kaplan-Meier and RMST for
//! right-censored data.

use serde::{Deserialize, Serialize};

use crate::empirical::{at_risk_process, ecdf, uncensored_subdist, CensoredObs, MultiSampleData};
use crate::error::{Error, Result};
use crate::functionals::{kaplan_meier, nelson_aalen, rmst, wilcoxon, wilcoxon_curve, HazardBundle};
use crate::stepfn::StepFn;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Ecdf,
    AtRisk,
    Uncensored,
    NelsonAalen,
    KaplanMeier,
    /// `t ↦ ∫_(−∞,t] F_1 dF_2` for the first two groups.
    Wilcoxon,
}

/// Groups of observations; unlike [`MultiSampleData`], a single group is allowed.
#[derive(Clone, Debug, PartialEq)]
pub enum Groups {
    Plain(Vec<Vec<f64>>),
    Survival(Vec<Vec<CensoredObs>>),
}

impl Groups {
    pub fn num_groups(&self) -> usize {
        match self {
            Groups::Plain(g) => g.len(),
            Groups::Survival(g) => g.len(),
        }
    }
}

impl From<MultiSampleData> for Groups {
    fn from(data: MultiSampleData) -> Groups {
        match data {
            MultiSampleData::Plain(g) => Groups::Plain(g),
            MultiSampleData::Survival(g) => Groups::Survival(g),
        }
    }
}

/// Which sample a curve is computed from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subject {
    Pooled,
    Group(usize),
}

fn plain_subject(groups: &[Vec<f64>], subject: Subject) -> Result<Vec<f64>> {
    match subject {
        Subject::Pooled => Ok(groups.concat()),
        Subject::Group(j) => groups
            .get(j)
            .cloned()
            .ok_or_else(|| Error::Domain(format!("no group {j}"))),
    }
}

fn survival_subject(groups: &[Vec<CensoredObs>], subject: Subject) -> Result<Vec<CensoredObs>> {
    match subject {
        Subject::Pooled => Ok(groups.concat()),
        Subject::Group(j) => groups
            .get(j)
            .cloned()
            .ok_or_else(|| Error::Domain(format!("no group {j}"))),
    }
}

fn default_tau(sample: &[CensoredObs]) -> f64 {
    sample.iter().map(|o| o.time).fold(0.0, f64::max)
}

fn bundle(sample: &[CensoredObs], tau: Option<f64>) -> Result<HazardBundle> {
    let tau = tau.unwrap_or_else(|| default_tau(sample));
    HazardBundle::from_sample(sample, tau)
}

/// The requested curve of one subject. `tau` defaults to the largest
/// observation time of the subject.
pub fn curve(data: &Groups, kind: CurveKind, subject: Subject, tau: Option<f64>) -> Result<StepFn> {
    match (data, kind) {
        (Groups::Plain(groups), CurveKind::Ecdf) => ecdf(&plain_subject(groups, subject)?),
        (Groups::Plain(groups), CurveKind::Wilcoxon) => {
            if groups.len() < 2 {
                return Err(Error::Domain("the Wilcoxon curve needs two groups".into()));
            }
            wilcoxon_curve(&ecdf(&groups[0])?, &ecdf(&groups[1])?)
        }
        (Groups::Survival(groups), _) => {
            let sample = survival_subject(groups, subject)?;
            match kind {
                CurveKind::Ecdf => ecdf(&sample.iter().map(|o| o.time).collect::<Vec<_>>()),
                CurveKind::AtRisk => at_risk_process(&sample),
                CurveKind::Uncensored => uncensored_subdist(&sample),
                CurveKind::NelsonAalen => nelson_aalen(&bundle(&sample, tau)?),
                CurveKind::KaplanMeier => kaplan_meier(&bundle(&sample, tau)?),
                CurveKind::Wilcoxon => Err(Error::Domain("the Wilcoxon curve needs plain data".into())),
            }
        }
        (Groups::Plain(_), other) => Err(Error::Domain(format!("{other:?} needs survival data"))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlainSummary {
    pub label: String,
    pub n: usize,
    /// Distinct observed values.
    pub values: Vec<f64>,
    pub ecdf: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalSummary {
    pub label: String,
    pub n: usize,
    pub tau: f64,
    /// Distinct observation times up to `τ`.
    pub times: Vec<f64>,
    pub at_risk: Vec<usize>,
    pub events: Vec<usize>,
    pub kaplan_meier: Vec<f64>,
    pub nelson_aalen: Vec<f64>,
    pub rmst: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AnalysisReport {
    Plain {
        groups: Vec<PlainSummary>,
        pooled: PlainSummary,
        /// `∫ F_1 dF_2` over the whole line, for exactly two groups.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        wilcoxon: Option<f64>,
    },
    Survival {
        groups: Vec<SurvivalSummary>,
        pooled: SurvivalSummary,
    },
}

fn distinct(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn plain_summary(label: &str, sample: &[f64]) -> Result<PlainSummary> {
    let f = ecdf(sample)?;
    let values = distinct(sample.to_vec());
    let ecdf = values.iter().map(|&x| f.eval(x)).collect::<Result<_>>()?;
    Ok(PlainSummary {
        label: label.to_string(),
        n: sample.len(),
        values,
        ecdf,
    })
}

fn survival_summary(label: &str, sample: &[CensoredObs], tau: Option<f64>) -> Result<SurvivalSummary> {
    let b = bundle(sample, tau)?;
    let km = kaplan_meier(&b)?;
    let na = nelson_aalen(&b)?;
    let times = distinct(sample.iter().map(|o| o.time).filter(|&t| t <= b.tau).collect());
    let mut summary = SurvivalSummary {
        label: label.to_string(),
        n: sample.len(),
        tau: b.tau,
        at_risk: Vec::with_capacity(times.len()),
        events: Vec::with_capacity(times.len()),
        kaplan_meier: Vec::with_capacity(times.len()),
        nelson_aalen: Vec::with_capacity(times.len()),
        rmst: rmst(&km, b.tau)?,
        times,
    };
    for &t in &summary.times {
        summary.at_risk.push(sample.iter().filter(|o| o.time >= t).count());
        summary
            .events
            .push(sample.iter().filter(|o| o.time == t && o.event).count());
        summary.kaplan_meier.push(km.eval(t)?);
        summary.nelson_aalen.push(na.eval(t)?);
    }
    Ok(summary)
}

/// Per-group and pooled summaries. `labels` name the groups; `tau` is used for
/// survival data and defaults to each subject's largest observation time.
pub fn analyze(data: &Groups, labels: &[String], tau: Option<f64>) -> Result<AnalysisReport> {
    if labels.len() != data.num_groups() {
        return Err(Error::Contract("one label per group is required".into()));
    }
    if data.num_groups() == 0 {
        return Err(Error::Contract("no groups to analyze".into()));
    }
    match data {
        Groups::Plain(groups) => {
            let summaries = groups
                .iter()
                .zip(labels)
                .map(|(g, l)| plain_summary(l, g))
                .collect::<Result<Vec<_>>>()?;
            let wilcoxon = if groups.len() == 2 {
                let (f1, f2) = (ecdf(&groups[0])?, ecdf(&groups[1])?);
                Some(wilcoxon(&f1, &f2, f1.hi())?)
            } else {
                None
            };
            Ok(AnalysisReport::Plain {
                groups: summaries,
                pooled: plain_summary("pooled", &groups.concat())?,
                wilcoxon,
            })
        }
        Groups::Survival(groups) => {
            let summaries = groups
                .iter()
                .zip(labels)
                .map(|(g, l)| survival_summary(l, g, tau).map_err(|e| e.context(format!("group {l}"))))
                .collect::<Result<Vec<_>>>()?;
            Ok(AnalysisReport::Survival {
                groups: summaries,
                pooled: survival_summary("pooled", &groups.concat(), tau)?,
            })
        }
    }
}
