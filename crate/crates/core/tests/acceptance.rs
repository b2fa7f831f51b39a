//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line and then
//! asserts, so `cargo test --test acceptance -- --test-threads=1` gives a
//! readable summary.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;

use permboot::empirical::{pooled_ecdf, CensoredObs, MultiSampleData, PooledData};
use permboot::functionals::{kaplan_meier, rmst, HazardBundle};
use permboot::resampling::{draw_permutation, enumerate_permutations, ResampleDraw, ResampleKind, SeedSpec};
use permboot::verify::{
    builtin_ratio_check, conditional_cov_experiment, duhamel_residual, exhaustive_group_means, group_ecdf_moments,
    increment_condition_probe, inverse_counterexample, linearization_residual_experiment, statistic_moments,
    ExperimentConfig, IncrementFamily, KindReport, LinearizationReport, RatioFunctional, VerifyReport, DEFAULT_RATIO_N,
};
use permboot::{Convention, StepFn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(criterion: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    // Written past the harness capture so the summary is always visible.
    let mut out = std::io::stdout().lock();
    writeln!(out, "\nacceptance {criterion:>2} [{verdict}] {name}: {detail}").unwrap();
    out.flush().unwrap();
}

fn config(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ExperimentConfig::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

fn covariance_config() -> ExperimentConfig {
    let cfg = config("plain_indicator.json");
    assert_eq!(cfg.sizes, vec![200, 200]);
    assert_eq!((cfg.outer_reps, cfg.draws), (100, 2000));
    assert_eq!((cfg.tolerance.abs_tol, cfg.tolerance.se_multiplier), (0.02, 4.0));
    cfg
}

fn nelson_aalen_config() -> ExperimentConfig {
    let cfg = config("survival_na.json");
    assert_eq!(cfg.sizes, vec![300, 300]);
    assert_eq!((cfg.tolerance.abs_tol, cfg.tolerance.se_multiplier), (0.05, 4.0));
    cfg
}

/// Criteria 1 and 2 share datasets; computed once on a single thread.
fn covariance_report() -> &'static VerifyReport {
    static R: OnceLock<VerifyReport> = OnceLock::new();
    R.get_or_init(|| in_pool(1, || conditional_cov_experiment(&covariance_config()).unwrap()))
}

fn nelson_aalen_report() -> &'static VerifyReport {
    static R: OnceLock<VerifyReport> = OnceLock::new();
    R.get_or_init(|| in_pool(1, || conditional_cov_experiment(&nelson_aalen_config()).unwrap()))
}

fn kind(r: &VerifyReport, k: ResampleKind) -> &KindReport {
    r.kinds.iter().find(|x| x.kind == k).unwrap()
}

fn worst_ratio(k: &KindReport) -> f64 {
    k.cells
        .iter()
        .map(|c| c.deviation.abs() / c.threshold)
        .fold(0.0, f64::max)
}

#[test]
fn criterion_01_permutation_covariance() {
    let r = covariance_report();
    let k = kind(r, ResampleKind::Permutation);
    let pass = k.all_pass && k.cells.len() == 18 * 19 / 2;
    report(
        1,
        "permutation covariance",
        pass,
        &format!(
            "{} cells, {} pass, max |MC - kernel| = {:.5}, worst |dev|/threshold = {:.3}",
            k.cells.len(),
            k.cells.iter().filter(|c| c.pass).count(),
            k.max_abs_deviation,
            worst_ratio(k)
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_02_pooled_bootstrap_covariance() {
    let r = covariance_report();
    let k = kind(r, ResampleKind::PooledBootstrap);
    let zero_cells: Vec<_> = k.cells.iter().filter(|c| c.zero_check.is_some()).collect();
    let pass = k.all_pass && k.zero_cells_pass == Some(true) && zero_cells.len() == 9 * 9;
    let worst_zero = zero_cells.iter().map(|c| c.mc.abs() / c.mc_se).fold(0.0, f64::max);
    report(
        2,
        "pooled-bootstrap covariance",
        pass,
        &format!(
            "max |MC - kernel| = {:.5}, worst |dev|/threshold = {:.3}, {} cross-group cells, worst |MC|/SE = {:.2} (limit 4)",
            k.max_abs_deviation,
            worst_ratio(k),
            zero_cells.len(),
            worst_zero
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_03_exhaustive_oracle() {
    let cfg = config("exhaustive_toy.json");
    let data = cfg.data.clone().unwrap();
    let MultiSampleData::Plain(groups) = &data else {
        panic!("plain data expected")
    };
    let grid = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5];
    let h = pooled_ecdf(&PooledData::from_groups(groups).unwrap()).unwrap();
    let h_grid: Vec<f64> = grid.iter().map(|&t| h.eval(t).unwrap()).collect();
    let means = exhaustive_group_means(groups, &grid).unwrap();
    let means_exact = means.iter().all(|m| *m == h_grid);

    let all: Vec<ResampleDraw> = enumerate_permutations(4).unwrap().collect();
    let pooled = PooledData::from_groups(groups).unwrap();
    let seed = SeedSpec::new(20240601, 3);
    let mut seen = HashSet::new();
    let mut sampled = Vec::new();
    let mut b = 0;
    while sampled.len() < 24 {
        let d = draw_permutation(&pooled, seed.derive(0, b));
        if seen.insert(d.assignment.clone()) {
            sampled.push(d);
        }
        b += 1;
    }
    let ecdf_exact =
        group_ecdf_moments(groups, &grid, &sampled).unwrap() == group_ecdf_moments(groups, &grid, &all).unwrap();
    let stat_exact = statistic_moments(&cfg, &data, &sampled).unwrap() == statistic_moments(&cfg, &data, &all).unwrap();
    let exhaustive = conditional_cov_experiment(&cfg).unwrap();
    let pass = means_exact && ecdf_exact && stat_exact && exhaustive.all_pass;
    report(
        3,
        "exhaustive oracle",
        pass,
        &format!(
            "means == H_N: {means_exact}; {b} seeded draws gave 24 distinct permutations, moments bit-identical: {}; exhaustive covariance == N/(N-1) x kernel: {}",
            ecdf_exact && stat_exact,
            exhaustive.all_pass
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_04_nelson_aalen_permutation_limit() {
    let r = nelson_aalen_report();
    let k = kind(r, ResampleKind::Permutation);
    let pass = k.all_pass && r.grid.len() == 5;
    report(
        4,
        "Nelson-Aalen permutation limit",
        pass,
        &format!(
            "tau = {:.4}, {} cells, max |MC - kernel| = {:.5}, worst |dev|/threshold = {:.3}",
            r.tau.unwrap(),
            k.cells.len(),
            k.max_abs_deviation,
            worst_ratio(k)
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_05_kaplan_meier_exactness() {
    let sample = [
        CensoredObs::new(1.0, true),
        CensoredObs::new(2.0, false),
        CensoredObs::new(3.0, true),
    ];
    let km = kaplan_meier(&HazardBundle::from_sample(&sample, 3.0).unwrap()).unwrap();
    let values: Vec<f64> = [1.0, 2.0, 3.0].iter().map(|&t| km.eval(t).unwrap()).collect();
    let area = rmst(&km, 3.0).unwrap();
    let tol = 1e-15;
    let pass = values
        .iter()
        .zip([2.0 / 3.0, 2.0 / 3.0, 0.0])
        .all(|(v, w)| (v - w).abs() <= tol)
        && (area - 7.0 / 3.0).abs() <= tol;
    report(
        5,
        "Kaplan-Meier exactness",
        pass,
        &format!("KM = {values:?}, RMST(3) = {area:?}, tolerance {tol:e}"),
    );
    assert!(pass);
}

fn random_cumulative_hazard(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let k = rng.random_range(0..=20);
    let mut times: Vec<f64> = (0..k).map(|_| rng.random_range(0.001..1.0)).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let jumps = times.iter().map(|_| rng.random_range(-0.9..2.0)).collect();
    (times, jumps)
}

/// Duhamel residual computed from the raw jumps, without the step-function library.
fn duhamel_oracle(a: &(Vec<f64>, Vec<f64>), b: &(Vec<f64>, Vec<f64>)) -> f64 {
    let mut times: Vec<f64> = a.0.iter().chain(&b.0).copied().collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let jump_at = |f: &(Vec<f64>, Vec<f64>), t: f64| f.0.iter().position(|&s| s == t).map_or(0.0, |i| f.1[i]);
    let (mut pa, mut pb, mut sum, mut abs_sum, mut worst) = (1.0f64, 1.0f64, 0.0f64, 0.0f64, 0.0f64);
    for t in times {
        let (da, db) = (jump_at(a, t), jump_at(b, t));
        let pb_before = pb;
        pa *= 1.0 + da;
        pb *= 1.0 + db;
        let term = pb_before * (db - da) / pa;
        sum += term;
        abs_sum += term.abs();
        let scale = pa.abs().max(pb.abs()).max(pa.abs() * abs_sum);
        worst = worst.max(((pb - pa) - pa * sum).abs() / scale);
    }
    worst
}

#[test]
fn criterion_06_duhamel_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    let (mut lib_worst, mut oracle_worst) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let a = random_cumulative_hazard(&mut rng);
        let b = random_cumulative_hazard(&mut rng);
        let to_fn = |f: &(Vec<f64>, Vec<f64>)| {
            StepFn::from_jumps(0.0, 1.0, 0.0, f.0.clone(), &f.1, Convention::RightContinuous).unwrap()
        };
        lib_worst = lib_worst.max(duhamel_residual(&to_fn(&a), &to_fn(&b)).unwrap());
        oracle_worst = oracle_worst.max(duhamel_oracle(&a, &b));
    }
    let pass = lib_worst <= 1e-12 && oracle_worst <= 1e-12;
    report(
        6,
        "Duhamel identity",
        pass,
        &format!("1000 pairs, max relative residual {lib_worst:.3e} (library), {oracle_worst:.3e} (raw-jump oracle), limit 1e-12"),
    );
    assert!(pass);
}

fn ladder_medians(r: &LinearizationReport) -> Vec<f64> {
    r.entries.iter().map(|e| e.median).collect()
}

fn ladder_ok(m: &[f64]) -> bool {
    m.windows(2).all(|w| w[1] < w[0]) && m[m.len() - 1] < 0.5 * m[0]
}

#[test]
fn criterion_07_linearization_residual() {
    let w_cfg = config("linearization_wilcoxon.json");
    let km_cfg = config("linearization_km.json");
    assert_eq!(w_cfg.size_ladder, Some(vec![100, 400, 1600]));
    assert_eq!(km_cfg.size_ladder, Some(vec![100, 400, 1600]));
    let w = ladder_medians(&linearization_residual_experiment(&w_cfg).unwrap());
    let km = ladder_medians(&linearization_residual_experiment(&km_cfg).unwrap());
    let pass = w.len() == 3 && km.len() == 3 && ladder_ok(&w) && ladder_ok(&km);
    report(
        7,
        "linearization residual",
        pass,
        &format!("median sup-norm residual at N = 100, 400, 1600: Wilcoxon {w:.5?}, KM(tau) {km:.5?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_08_counterexample() {
    let ns = [1, 4, 25, 100, 10_000];
    let rows = inverse_counterexample(&ns).unwrap();
    let table_ok = rows.len() == ns.len()
        && rows
            .iter()
            .all(|r| r.ratio == -0.5 && r.derivative == -1.0 && r.gap == 0.5);
    let probes: Vec<(f64, f64)> = ns
        .iter()
        .map(|&n| {
            (
                increment_condition_probe(IncrementFamily::Counterexample, n, 1.0).unwrap(),
                increment_condition_probe(IncrementFamily::Identical, n, 1.0).unwrap(),
            )
        })
        .collect();
    let probes_ok = probes.iter().all(|&(c, i)| c == 1.0 && i == 0.0);
    let pass = table_ok && probes_ok;
    report(
        8,
        "inverse-map counterexample",
        pass,
        &format!(
            "ratios {:?}, probe(A_n) {:?}, probe(A) {:?}",
            rows.iter().map(|r| r.ratio).collect::<Vec<_>>(),
            probes.iter().map(|p| p.0).collect::<Vec<_>>(),
            probes.iter().map(|p| p.1).collect::<Vec<_>>()
        ),
    );
    assert!(pass);
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

#[test]
fn criterion_09_hadamard_ratio_convergence() {
    assert_eq!(DEFAULT_RATIO_N.first(), Some(&4));
    assert_eq!(DEFAULT_RATIO_N.last(), Some(&1024));
    let w = builtin_ratio_check(RatioFunctional::Wilcoxon, &DEFAULT_RATIO_N).unwrap();
    let p = builtin_ratio_check(RatioFunctional::ProductIntegral, &DEFAULT_RATIO_N).unwrap();
    let factor = |d: &[f64]| d[0] / d[d.len() - 1];
    let pass = factor(&w) >= 4.0 && factor(&p) >= 4.0;
    report(
        9,
        "Hadamard ratio convergence",
        pass,
        &format!(
            "n = {DEFAULT_RATIO_N:?}: Wilcoxon [{}] (x{:.1}), product integral [{}] (x{:.1}), need x4",
            sci(&w),
            factor(&w),
            sci(&p),
            factor(&p)
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_10_determinism_across_threads() {
    let bytes = |r: &VerifyReport| serde_json::to_vec(r).unwrap();
    let cov4 = in_pool(4, || conditional_cov_experiment(&covariance_config()).unwrap());
    let na4 = in_pool(4, || conditional_cov_experiment(&nelson_aalen_config()).unwrap());
    let cov_same = bytes(covariance_report()) == bytes(&cov4);
    let na_same = bytes(nelson_aalen_report()) == bytes(&na4);
    let pass = cov_same && na_same;
    report(
        10,
        "determinism across thread counts",
        pass,
        &format!("1 vs 4 threads byte-identical: criteria 1+2 report {cov_same}, criterion 4 report {na_same}"),
    );
    assert!(pass);
}
