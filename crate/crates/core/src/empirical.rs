//! Multi-sample data, pooling, and the empirical step functions built from it.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stepfn::{Convention, StepFn};

/// A right-censored observation `(Z, Δ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CensoredObs {
    pub time: f64,
    /// `true` when the failure was observed (`Δ = 1`).
    pub event: bool,
}

impl CensoredObs {
    pub fn new(time: f64, event: bool) -> CensoredObs {
        CensoredObs { time, event }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "groups", rename_all = "snake_case")]
pub enum MultiSampleData {
    Plain(Vec<Vec<f64>>),
    Survival(Vec<Vec<CensoredObs>>),
}

fn check_groups<T>(groups: &[Vec<T>]) -> Result<()> {
    if groups.len() < 2 {
        return Err(Error::Contract(format!("need at least 2 groups, got {}", groups.len())));
    }
    if let Some(j) = groups.iter().position(Vec::is_empty) {
        return Err(Error::Contract(format!("group {} is empty", j + 1)));
    }
    Ok(())
}

pub(crate) fn check_censored(sample: &[CensoredObs]) -> Result<()> {
    if let Some(o) = sample.iter().find(|o| !o.time.is_finite() || o.time < 0.0) {
        return Err(Error::Contract(format!(
            "observation time {} must be finite and >= 0",
            o.time
        )));
    }
    Ok(())
}

impl MultiSampleData {
    pub fn plain(groups: Vec<Vec<f64>>) -> Result<MultiSampleData> {
        check_groups(&groups)?;
        if groups.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Contract("observations must be finite".into()));
        }
        Ok(MultiSampleData::Plain(groups))
    }

    pub fn survival(groups: Vec<Vec<CensoredObs>>) -> Result<MultiSampleData> {
        check_groups(&groups)?;
        for g in &groups {
            check_censored(g)?;
        }
        Ok(MultiSampleData::Survival(groups))
    }

    pub fn num_groups(&self) -> usize {
        match self {
            MultiSampleData::Plain(g) => g.len(),
            MultiSampleData::Survival(g) => g.len(),
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        match self {
            MultiSampleData::Plain(g) => g.iter().map(Vec::len).collect(),
            MultiSampleData::Survival(g) => g.iter().map(Vec::len).collect(),
        }
    }

    pub fn total(&self) -> usize {
        self.sizes().iter().sum()
    }
}

/// The pooled sample `(Z_{N1}, …, Z_{NN})` in group-concatenation order.
#[derive(Clone, Debug, PartialEq)]
pub struct PooledData<T> {
    pooled: Vec<T>,
    sizes: Vec<usize>,
    /// `(N_0 = 0, N_1, …, N_m)`.
    cumulative: Vec<usize>,
}

impl<T: Clone> PooledData<T> {
    pub fn from_groups(groups: &[Vec<T>]) -> Result<PooledData<T>> {
        if groups.is_empty() {
            return Err(Error::Contract("no groups to pool".into()));
        }
        if let Some(j) = groups.iter().position(Vec::is_empty) {
            return Err(Error::Contract(format!("group {} is empty", j + 1)));
        }
        let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
        let mut cumulative = vec![0];
        for n in &sizes {
            cumulative.push(cumulative.last().unwrap() + n);
        }
        Ok(PooledData {
            pooled: groups.concat(),
            sizes,
            cumulative,
        })
    }
}

impl<T> PooledData<T> {
    pub fn pooled(&self) -> &[T] {
        &self.pooled
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn cumulative(&self) -> &[usize] {
        &self.cumulative
    }

    pub fn total(&self) -> usize {
        self.pooled.len()
    }

    pub fn num_groups(&self) -> usize {
        self.sizes.len()
    }

    /// Pooled positions `N_{j-1} .. N_j` (zero-based, half-open) of group `j`.
    pub fn group_range(&self, j: usize) -> std::ops::Range<usize> {
        self.cumulative[j]..self.cumulative[j + 1]
    }

    pub fn group(&self, j: usize) -> &[T] {
        &self.pooled[self.group_range(j)]
    }

    /// Sample fractions `n_j / N`.
    pub fn fractions(&self) -> Vec<f64> {
        let n = self.total() as f64;
        self.sizes.iter().map(|&k| k as f64 / n).collect()
    }

    pub fn lambdas(&self) -> Result<LambdaVector> {
        LambdaVector::new(self.fractions())
    }
}

/// Limiting sample fractions `λ_j ∈ (0, 1)` with `Σ λ_j = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LambdaVector(Vec<f64>);

impl LambdaVector {
    pub fn new(lambdas: Vec<f64>) -> Result<LambdaVector> {
        if lambdas.is_empty() {
            return Err(Error::Contract("empty lambda vector".into()));
        }
        if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
            return Err(Error::Contract(format!("lambda {l} not in (0, 1)")));
        }
        let sum: f64 = lambdas.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Contract(format!("lambdas sum to {sum}, not 1")));
        }
        Ok(LambdaVector(lambdas))
    }

    pub fn from_sizes(sizes: &[usize]) -> Result<LambdaVector> {
        let n: usize = sizes.iter().sum();
        LambdaVector::new(sizes.iter().map(|&k| k as f64 / n as f64).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, j: usize) -> f64 {
        self.0[j]
    }
}

impl TryFrom<Vec<f64>> for LambdaVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        LambdaVector::new(v)
    }
}

impl From<LambdaVector> for Vec<f64> {
    fn from(l: LambdaVector) -> Vec<f64> {
        l.0
    }
}

/// Distinct sorted values with their multiplicities.
fn tally(mut values: Vec<f64>) -> Vec<(f64, usize)> {
    values.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, usize)> = Vec::new();
    for v in values {
        match out.last_mut() {
            Some((x, c)) if *x == v => *c += 1,
            _ => out.push((v, 1)),
        }
    }
    out
}

/// Right-continuous ECDF on `(-∞, ∞)`; tied observations accumulate.
pub fn ecdf(sample: &[f64]) -> Result<StepFn> {
    if sample.is_empty() {
        return Err(Error::Contract("ECDF of an empty sample".into()));
    }
    let n = sample.len() as f64;
    let mut seen = 0usize;
    let (breaks, levels) = tally(sample.to_vec())
        .into_iter()
        .map(|(x, c)| {
            seen += c;
            (x, seen as f64 / n)
        })
        .unzip();
    StepFn::from_levels(
        f64::NEG_INFINITY,
        f64::INFINITY,
        0.0,
        breaks,
        levels,
        Convention::RightContinuous,
    )
}

/// `H_N`, the ECDF of the concatenated pooled sample.
pub fn pooled_ecdf(data: &PooledData<f64>) -> Result<StepFn> {
    ecdf(data.pooled())
}

/// `H̄_n(t) = n⁻¹ Σ 1{Z ≥ t}` as a left-continuous function on `[0, ∞)`.
///
/// The drop caused by observations at `Z = u` happens just after `u`, so a
/// breakpoint may sit at the lower end `0`.
pub fn at_risk_process(sample: &[CensoredObs]) -> Result<StepFn> {
    if sample.is_empty() {
        return Err(Error::Contract("at-risk process of an empty sample".into()));
    }
    check_censored(sample)?;
    let n = sample.len();
    let mut remaining = n;
    let (breaks, levels) = tally(sample.iter().map(|o| o.time).collect())
        .into_iter()
        .map(|(z, c)| {
            remaining -= c;
            (z, remaining as f64 / n as f64)
        })
        .unzip();
    StepFn::from_levels(0.0, f64::INFINITY, 1.0, breaks, levels, Convention::LeftContinuous)
}

/// `H^uc_n(t) = n⁻¹ Σ Δ 1{Z ≤ t}`, right-continuous on `[0, ∞)`. Uncensored
/// observations at time `0` land in the base value.
pub fn uncensored_subdist(sample: &[CensoredObs]) -> Result<StepFn> {
    if sample.is_empty() {
        return Err(Error::Contract("subdistribution of an empty sample".into()));
    }
    check_censored(sample)?;
    let n = sample.len() as f64;
    let events: Vec<f64> = sample.iter().filter(|o| o.event).map(|o| o.time).collect();
    let at_zero = events.iter().filter(|&&z| z == 0.0).count();
    let mut seen = at_zero;
    let (breaks, levels) = tally(events.into_iter().filter(|&z| z > 0.0).collect())
        .into_iter()
        .map(|(z, c)| {
            seen += c;
            (z, seen as f64 / n)
        })
        .unzip();
    StepFn::from_levels(
        0.0,
        f64::INFINITY,
        at_zero as f64 / n,
        breaks,
        levels,
        Convention::RightContinuous,
    )
}

/// Data read from CSV, with the original group labels in first-appearance order.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledData {
    pub labels: Vec<String>,
    pub data: MultiSampleData,
}

fn group_index(labels: &mut Vec<String>, label: &str) -> usize {
    match labels.iter().position(|l| l == label) {
        Some(i) => i,
        None => {
            labels.push(label.to_string());
            labels.len() - 1
        }
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Parse(format!("missing CSV column {name:?}")))
}

fn real_field(rec: &csv::StringRecord, idx: usize, line: u64) -> Result<f64> {
    let raw = rec.get(idx).unwrap_or("").trim();
    raw.parse::<f64>()
        .map_err(|e| Error::Parse(format!("line {line}: {raw:?}: {e}")))
}

/// Plain mode: columns `group,value`.
pub fn read_plain_csv<R: Read>(reader: R) -> Result<LabeledData> {
    let (labels, groups) = read_plain_groups(reader)?;
    Ok(LabeledData {
        labels,
        data: MultiSampleData::plain(groups)?,
    })
}

/// Like [`read_plain_csv`] but accepts any number of groups.
pub fn read_plain_groups<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let (gi, vi) = (column(&headers, "group")?, column(&headers, "value")?);
    let mut labels = Vec::new();
    let mut groups: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = line as u64 + 2;
        let j = group_index(&mut labels, rec.get(gi).unwrap_or("").trim());
        if j == groups.len() {
            groups.push(Vec::new());
        }
        groups[j].push(real_field(&rec, vi, line)?);
    }
    Ok((labels, groups))
}

/// Survival mode: columns `group,time,status`, status in `{0, 1}`.
pub fn read_survival_csv<R: Read>(reader: R) -> Result<LabeledData> {
    let (labels, groups) = read_survival_groups(reader)?;
    Ok(LabeledData {
        labels,
        data: MultiSampleData::survival(groups)?,
    })
}

/// Like [`read_survival_csv`] but accepts any number of groups.
pub fn read_survival_groups<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<CensoredObs>>)> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let gi = column(&headers, "group")?;
    let ti = column(&headers, "time")?;
    let si = column(&headers, "status")?;
    let mut labels = Vec::new();
    let mut groups: Vec<Vec<CensoredObs>> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = line as u64 + 2;
        let j = group_index(&mut labels, rec.get(gi).unwrap_or("").trim());
        if j == groups.len() {
            groups.push(Vec::new());
        }
        let time = real_field(&rec, ti, line)?;
        let event = match rec.get(si).unwrap_or("").trim() {
            "1" => true,
            "0" => false,
            other => return Err(Error::Parse(format!("line {line}: status {other:?} is not 0 or 1"))),
        };
        groups[j].push(CensoredObs { time, event });
    }
    Ok((labels, groups))
}

/// Writes data back in the CSV layout the readers accept; groups are
/// labelled `1..=m`.
pub fn write_csv<W: Write>(data: &MultiSampleData, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    match data {
        MultiSampleData::Plain(groups) => {
            w.write_record(["group", "value"])?;
            for (j, g) in groups.iter().enumerate() {
                for x in g {
                    w.write_record([(j + 1).to_string(), crate::fmt_real(*x)])?;
                }
            }
        }
        MultiSampleData::Survival(groups) => {
            w.write_record(["group", "time", "status"])?;
            for (j, g) in groups.iter().enumerate() {
                for o in g {
                    w.write_record([
                        (j + 1).to_string(),
                        crate::fmt_real(o.time),
                        u8::from(o.event).to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}
