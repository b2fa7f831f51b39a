use std::fmt;
use std::path::Path;

use permboot::analysis::{analyze, curve, AnalysisReport, CurveKind, Groups, Subject};
use permboot::empirical::{read_plain_groups, read_survival_groups, write_csv};
use permboot::verify::{
    conditional_cov_experiment, increment_condition_probe, inverse_counterexample, kernel_report,
    linearization_residual_experiment, ExperimentConfig, IncrementFamily, VerifyReport,
};
use permboot::Error;

use crate::output::{emit, json_bytes, real, write_atomic, Table};
use crate::{Command, CurveArg, DataMode, Format, SeedArgs, EXIT_DATA, EXIT_USAGE, EXIT_VERIFY_FAILED};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Lib(Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Lib(e) if !e.is_data_error() => EXIT_USAGE,
            _ => EXIT_DATA,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load_config(path: &Path, seed: &SeedArgs) -> Result<ExperimentConfig, CliError> {
    let text = read_text(path)?;
    let mut cfg = ExperimentConfig::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if let Some(s) = seed.seed {
        cfg.seed.master_seed = s;
    }
    Ok(cfg)
}

fn load_data(path: &Path, mode: DataMode) -> Result<(Vec<String>, Groups), CliError> {
    let text = read_text(path)?;
    let survival = match mode {
        DataMode::Plain => false,
        DataMode::Survival => true,
        DataMode::Auto => text
            .lines()
            .next()
            .is_some_and(|h| h.split(',').any(|c| c.trim() == "status")),
    };
    let parsed = if survival {
        read_survival_groups(text.as_bytes()).map(|(l, g)| (l, Groups::Survival(g)))
    } else {
        read_plain_groups(text.as_bytes()).map(|(l, g)| (l, Groups::Plain(g)))
    };
    Ok(parsed.map_err(|e| e.context(path.display()))?)
}

pub fn run(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Simulate { config, seed, rep, out } => {
            let cfg = load_config(&config, &seed)?;
            let data = permboot::verify::simulate_dataset(&cfg, rep)?;
            let format = out.format.unwrap_or(Format::Csv);
            let bytes = match format {
                Format::Csv => {
                    let mut buf = Vec::new();
                    write_csv(&data, &mut buf)?;
                    buf
                }
                Format::Json => json_bytes(&data)?,
            };
            emit(&out, "simulate", format, &bytes)?;
            Ok(0)
        }
        Command::Analyze { input, mode, tau, out } => {
            let (labels, groups) = load_data(&input, mode)?;
            let report = analyze(&groups, &labels, tau)?;
            let format = out.format.unwrap_or(Format::Json);
            let bytes = match format {
                Format::Json => json_bytes(&report)?,
                Format::Csv => analysis_csv(&report)?,
            };
            emit(&out, "analyze", format, &bytes)?;
            Ok(0)
        }
        Command::Kernel { config, seed, out } => {
            let cfg = load_config(&config, &seed)?;
            eprintln!("permboot kernel: {:?} on sizes {:?}", cfg.scenario, cfg.sizes);
            let report = kernel_report(&cfg)?;
            let format = out.format.unwrap_or(Format::Json);
            let bytes = match format {
                Format::Json => json_bytes(&report)?,
                Format::Csv => {
                    let mut t = Table::new(&["kind", "row_group", "row_point", "col_group", "col_point", "value"])?;
                    for k in &report.kernels {
                        for (a, row) in k.matrix.iter().enumerate() {
                            for (b, v) in row.iter().enumerate() {
                                let (ra, rb) = (report.index[a], report.index[b]);
                                t.row([
                                    kind_name(k.kind).to_string(),
                                    ra.0.to_string(),
                                    ra.1.to_string(),
                                    rb.0.to_string(),
                                    rb.1.to_string(),
                                    real(*v),
                                ])?;
                            }
                        }
                    }
                    t.into_bytes()?
                }
            };
            emit(&out, "kernel", format, &bytes)?;
            Ok(0)
        }
        Command::Verify {
            config,
            seed,
            draws,
            exhaustive,
            linearization,
            cells_csv,
            out,
        } => {
            let mut cfg = load_config(&config, &seed)?;
            if let Some(b) = draws {
                cfg.draws = b;
            }
            if exhaustive {
                cfg.exhaustive = true;
            }
            cfg.validate()?;
            let format = out.format.unwrap_or(Format::Json);
            if linearization {
                if cells_csv.is_some() {
                    return Err(CliError::Usage("--cells-csv applies to covariance experiments".into()));
                }
                eprintln!("permboot verify: linearization residuals for {:?}", cfg.scenario);
                let report = linearization_residual_experiment(&cfg)?;
                eprintln!("permboot verify: finished in {:.1}s", report.runtime_secs);
                let bytes = match format {
                    Format::Json => json_bytes(&report)?,
                    Format::Csv => {
                        let mut t = Table::new(&["total", "kind", "count", "q25", "median", "q75", "q90", "max"])?;
                        for e in &report.entries {
                            t.row([
                                e.total.to_string(),
                                kind_name(e.kind).to_string(),
                                e.count.to_string(),
                                real(e.q25),
                                real(e.median),
                                real(e.q75),
                                real(e.q90),
                                real(e.max),
                            ])?;
                        }
                        t.into_bytes()?
                    }
                };
                emit(&out, "verify", format, &bytes)?;
                return Ok(0);
            }
            eprintln!(
                "permboot verify: {:?}, {} dataset(s) x {} draw(s)",
                cfg.scenario,
                cfg.outer_reps,
                if cfg.exhaustive {
                    "all".to_string()
                } else {
                    cfg.draws.to_string()
                }
            );
            let report = conditional_cov_experiment(&cfg)?;
            eprintln!(
                "permboot verify: finished in {:.1}s, {} redraw(s)",
                report.runtime_secs, report.redraws
            );
            let cells = cells_table(&report)?;
            if let Some(path) = cells_csv {
                write_atomic(&path, &cells).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            }
            let bytes = match format {
                Format::Json => json_bytes(&report)?,
                Format::Csv => cells,
            };
            emit(&out, "verify", format, &bytes)?;
            for k in &report.kinds {
                eprintln!(
                    "permboot verify: {}: {} of cells pass, max |dev| {}",
                    kind_name(k.kind),
                    real(k.pass_fraction),
                    real(k.max_abs_deviation)
                );
            }
            Ok(if report.all_pass { 0 } else { EXIT_VERIFY_FAILED })
        }
        Command::Counterexample { n, k, out } => {
            if !(k > 0.0 && k.is_finite()) {
                return Err(CliError::Usage(format!("--k must be positive, got {k}")));
            }
            let rows = inverse_counterexample(&n)?;
            let probes = n
                .iter()
                .map(|&m| {
                    Ok((
                        increment_condition_probe(IncrementFamily::Counterexample, m, k)?,
                        increment_condition_probe(IncrementFamily::Identical, m, k)?,
                    ))
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let format = out.format.unwrap_or(Format::Csv);
            let bytes = match format {
                Format::Csv => {
                    let mut t = Table::new(&[
                        "n",
                        "t_n",
                        "quantile",
                        "ratio",
                        "derivative",
                        "gap",
                        "probe_k",
                        "probe_counterexample",
                        "probe_identical",
                    ])?;
                    for (r, p) in rows.iter().zip(&probes) {
                        t.row([
                            r.n.to_string(),
                            real(r.t_n),
                            real(r.quantile),
                            real(r.ratio),
                            real(r.derivative),
                            real(r.gap),
                            real(k),
                            real(p.0),
                            real(p.1),
                        ])?;
                    }
                    t.into_bytes()?
                }
                Format::Json => {
                    let value: Vec<serde_json::Value> = rows
                        .iter()
                        .zip(&probes)
                        .map(|(r, p)| {
                            serde_json::json!({
                                "n": r.n, "t_n": r.t_n, "quantile": r.quantile, "ratio": r.ratio,
                                "derivative": r.derivative, "gap": r.gap, "probe_k": k,
                                "probe_counterexample": p.0, "probe_identical": p.1,
                            })
                        })
                        .collect();
                    json_bytes(&value)?
                }
            };
            emit(&out, "counterexample", format, &bytes)?;
            Ok(0)
        }
        Command::DumpFn {
            input,
            mode,
            curve: which,
            group,
            tau,
            out,
        } => {
            let (labels, groups) = load_data(&input, mode)?;
            let subject = if group == "pooled" {
                Subject::Pooled
            } else {
                match labels.iter().position(|l| *l == group) {
                    Some(j) => Subject::Group(j),
                    None => {
                        return Err(CliError::Usage(format!(
                            "unknown group {group:?}; labels are {labels:?}"
                        )))
                    }
                }
            };
            let f = curve(&groups, curve_kind(which), subject, tau)?;
            let format = out.format.unwrap_or(Format::Csv);
            let bytes = match format {
                Format::Json => json_bytes(&f)?,
                Format::Csv => {
                    let mut t = Table::new(&["breakpoint", "left_limit", "value"])?;
                    for (k, &b) in f.breakpoints().iter().enumerate() {
                        let before = if k == 0 { f.base() } else { f.levels()[k - 1] };
                        t.row([real(b), real(before), real(f.levels()[k])])?;
                    }
                    t.into_bytes()?
                }
            };
            emit(&out, "dump-fn", format, &bytes)?;
            Ok(0)
        }
    }
}

fn kind_name(kind: permboot::resampling::ResampleKind) -> &'static str {
    match kind {
        permboot::resampling::ResampleKind::Permutation => "permutation",
        permboot::resampling::ResampleKind::PooledBootstrap => "pooled_bootstrap",
    }
}

fn curve_kind(c: CurveArg) -> CurveKind {
    match c {
        CurveArg::Ecdf => CurveKind::Ecdf,
        CurveArg::AtRisk => CurveKind::AtRisk,
        CurveArg::Uncensored => CurveKind::Uncensored,
        CurveArg::NelsonAalen => CurveKind::NelsonAalen,
        CurveArg::KaplanMeier => CurveKind::KaplanMeier,
        CurveArg::Wilcoxon => CurveKind::Wilcoxon,
    }
}

fn cells_table(report: &VerifyReport) -> Result<Vec<u8>, CliError> {
    let mut t = Table::new(&[
        "kind",
        "row_group",
        "row_point",
        "col_group",
        "col_point",
        "kernel",
        "mc",
        "mc_se",
        "deviation",
        "se",
        "threshold",
        "pass",
        "zero_check",
    ])?;
    for k in &report.kinds {
        for c in &k.cells {
            t.row([
                kind_name(k.kind).to_string(),
                c.row.0.to_string(),
                c.row.1.to_string(),
                c.col.0.to_string(),
                c.col.1.to_string(),
                real(c.kernel),
                real(c.mc),
                real(c.mc_se),
                real(c.deviation),
                real(c.se),
                real(c.threshold),
                c.pass.to_string(),
                c.zero_check.map_or(String::new(), |z| z.to_string()),
            ])?;
        }
    }
    t.into_bytes()
}

fn analysis_csv(report: &AnalysisReport) -> Result<Vec<u8>, CliError> {
    match report {
        AnalysisReport::Plain { groups, pooled, .. } => {
            let mut t = Table::new(&["group", "value", "ecdf"])?;
            for g in groups.iter().chain(std::iter::once(pooled)) {
                for (v, f) in g.values.iter().zip(&g.ecdf) {
                    t.row([g.label.clone(), real(*v), real(*f)])?;
                }
            }
            t.into_bytes()
        }
        AnalysisReport::Survival { groups, pooled } => {
            let mut t = Table::new(&["group", "time", "at_risk", "events", "kaplan_meier", "nelson_aalen"])?;
            for g in groups.iter().chain(std::iter::once(pooled)) {
                for i in 0..g.times.len() {
                    t.row([
                        g.label.clone(),
                        real(g.times[i]),
                        g.at_risk[i].to_string(),
                        g.events[i].to_string(),
                        real(g.kaplan_meier[i]),
                        real(g.nelson_aalen[i]),
                    ])?;
                }
            }
            t.into_bytes()
        }
    }
}
