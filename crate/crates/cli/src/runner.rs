//! Command implementations behind the `nsync` binary: simulate, estimate,
//! mc, constants, and lan.  Replication-level parallelism runs on a bounded
//! worker pool with sub-seeds derived purely from (base seed, replication
//! index), so numeric outputs are identical for any worker count.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::io;
use crate::summary::{coordinate_summary, CoordinateSummary};
use nsync_core::asymptotics::{
    gamma1, gamma2, lan_log_ratio, lan_perturbation, summarize_lan, LanConfig, LanSummary,
};
use nsync_core::estimator::{estimate, EstimateReport};
use nsync_core::gaussian::simulate_increments;
use nsync_core::linalg::{inverse_spd, sqrt_spd, Mat};
use nsync_core::model::CoefficientModel;
use nsync_core::rng::sub_seed;
use nsync_core::sampling::{
    build_overlap, counting_diagnostics, estimate_constants, CountingDiagnostics,
    SchemeConstants, WindowPartition,
};

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

fn apply_overrides(cfg: &mut ExperimentConfig, ov: &Overrides) {
    if let Some(s) = ov.seed {
        cfg.run.base_seed = s;
    }
    if let Some(w) = ov.workers {
        cfg.run.workers = w;
    }
    if let Some(out) = &ov.out {
        cfg.output.dir = out.clone();
    }
}

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", dir.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::run(format!("serialization: {e}")))?;
    std::fs::write(path, text)?;
    Ok(())
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::run(format!("worker pool: {e}")))
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct SimulateOutput {
    pub scheme_path: PathBuf,
    pub increments_path: PathBuf,
    pub m1: usize,
    pub m2: usize,
    pub r_n: f64,
}

/// Draw one scheme and one increment vector under the true parameters and
/// dump them as text; byte-identical for a fixed (config, seed).
pub fn cmd_simulate(
    mut cfg: ExperimentConfig,
    ov: &Overrides,
) -> Result<SimulateOutput, CliError> {
    apply_overrides(&mut cfg, ov);
    cfg.require_true_values()?;
    let model = cfg.build_model()?;
    let generator = cfg.generator()?;
    let n = cfg.sampling.n;
    let h_n = cfg.h_n();
    let seed = cfg.run.base_seed;
    let scheme = generator.generate(n, h_n, sub_seed(seed, 1))?;
    let overlap = build_overlap(&scheme);
    let sigma0 = model.params().sigma0()?.to_vec();
    let theta0 = model.params().theta0()?.to_vec();
    let dx = simulate_increments(&scheme, &overlap, &model, &sigma0, &theta0, sub_seed(seed, 2))?;

    ensure_out_dir(&cfg.output.dir)?;
    let scheme_path = cfg.output.dir.join("scheme.txt");
    let increments_path = cfg.output.dir.join("increments.txt");
    io::write_scheme(&scheme_path, &scheme)?;
    io::write_increments(&increments_path, &dx)?;
    Ok(SimulateOutput {
        scheme_path,
        increments_path,
        m1: scheme.m(1),
        m2: scheme.m(2),
        r_n: scheme.max_gap(),
    })
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct EstimateOutput {
    pub software_version: String,
    pub config_fingerprint: String,
    pub n: usize,
    pub h_n: f64,
    pub constants_used: bool,
    pub report: EstimateReport,
}

/// Estimate from dumped data files; writes `report.json`.  When
/// `dump_covariance` is set, the assembled S_n(sigma_hat) goes to that path
/// in coordinate-list form.
pub fn cmd_estimate(
    mut cfg: ExperimentConfig,
    ov: &Overrides,
    scheme_path: &Path,
    increments_path: &Path,
    dump_covariance: Option<&Path>,
) -> Result<EstimateOutput, CliError> {
    apply_overrides(&mut cfg, ov);
    let model = cfg.build_model()?;
    let scheme = io::read_scheme(scheme_path)?;
    let dx = io::read_increments(increments_path)?;
    if dx.m1 != scheme.m(1) || dx.m2 != scheme.m(2) {
        return Err(CliError::data(format!(
            "increments ({}, {}) do not match the scheme ({}, {})",
            dx.m1,
            dx.m2,
            scheme.m(1),
            scheme.m(2)
        )));
    }
    let overlap = build_overlap(&scheme);
    let constants = cfg.resolve_constants(&model)?;
    let report = estimate(
        &dx,
        &scheme,
        &overlap,
        &model,
        &cfg.optimizer(),
        constants.as_ref(),
    )?;
    if let Some(path) = dump_covariance {
        let op = nsync_core::gaussian::assemble(&scheme, &overlap, &model, &report.sigma_hat)?;
        std::fs::write(path, io::covariance_to_string(&op, &report.sigma_hat))?;
    }
    let out = EstimateOutput {
        software_version: VERSION.into(),
        config_fingerprint: cfg.fingerprint(),
        n: scheme.n(),
        h_n: scheme.h_n(),
        constants_used: constants.is_some(),
        report,
    };
    ensure_out_dir(&cfg.output.dir)?;
    write_json(&cfg.output.dir.join("report.json"), &out)?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// mc
// ---------------------------------------------------------------------------

/// One replication row of the Monte Carlo study (also one CSV line).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepRow {
    pub rep: usize,
    pub seed: u64,
    pub ok: bool,
    pub n: usize,
    pub h_n: f64,
    pub m1: usize,
    pub m2: usize,
    pub r_n: f64,
    pub rho_bar: f64,
    pub boundary: bool,
    pub used_gls: bool,
    pub evals1: usize,
    pub evals2: usize,
    pub h1: f64,
    pub h2: f64,
    pub sigma_hat: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub se_plugin_sigma: Vec<f64>,
    pub se_plugin_theta: Vec<f64>,
    pub se_observed_sigma: Vec<f64>,
    pub se_observed_theta: Vec<f64>,
    /// Standardized errors sqrt(n) Gamma1^{1/2} (sigma_hat - sigma0) and
    /// sqrt(T_n) Gamma2^{1/2} (theta_hat - theta0).
    pub z_sigma: Vec<f64>,
    pub z_theta: Vec<f64>,
    /// Per-coordinate 95% CI coverage of the truth.
    pub cover_sigma: Vec<bool>,
    pub cover_theta: Vec<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct McAggregates {
    pub replications_used: usize,
    pub sigma: Vec<CoordinateSummary>,
    pub theta: Vec<CoordinateSummary>,
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub software_version: String,
    pub csv_path: PathBuf,
    pub n: usize,
    pub h_n: f64,
    pub t_n: f64,
    pub replications: usize,
    pub completed: usize,
    pub failed: usize,
    pub boundary_hits: usize,
    /// Gamma evaluated at the true parameters (also used for z-scores).
    pub gamma1: Vec<Vec<f64>>,
    pub gamma2: Vec<Vec<f64>>,
    /// All successful replications.
    pub aggregates: McAggregates,
    /// Successful replications without boundary contact.
    pub aggregates_interior: McAggregates,
    pub wall_clock_secs: f64,
    pub config_fingerprint: String,
    pub warnings: Vec<String>,
}

struct TheoryContext {
    sigma0: Vec<f64>,
    theta0: Vec<f64>,
    g1_sqrt: Mat,
    g2_sqrt: Mat,
    sd_theory_sigma: Vec<f64>,
    sd_theory_theta: Vec<f64>,
    g1: Mat,
    g2: Mat,
}

fn theory_context(
    model: &CoefficientModel,
    constants: &SchemeConstants,
    n: usize,
    h_n: f64,
) -> Result<TheoryContext, CliError> {
    let sigma0 = model.params().sigma0()?.to_vec();
    let theta0 = model.params().theta0()?.to_vec();
    let g1 = gamma1(model, constants, &sigma0)?;
    let g2 = gamma2(model, constants, &sigma0, &theta0)?;
    let g1_inv = inverse_spd(&g1)?;
    let g2_inv = inverse_spd(&g2)?;
    let t_n = n as f64 * h_n;
    let sd_theory_sigma = (0..sigma0.len())
        .map(|k| (g1_inv[(k, k)] / n as f64).sqrt())
        .collect();
    let sd_theory_theta = (0..theta0.len())
        .map(|k| (g2_inv[(k, k)] / t_n).sqrt())
        .collect();
    Ok(TheoryContext {
        g1_sqrt: sqrt_spd(&g1)?,
        g2_sqrt: sqrt_spd(&g2)?,
        sigma0,
        theta0,
        sd_theory_sigma,
        sd_theory_theta,
        g1,
        g2,
    })
}

fn standardize(rate: f64, g_sqrt: &Mat, est: &[f64], truth: &[f64]) -> Vec<f64> {
    let d = truth.len();
    let mut z = vec![0.0; d];
    for i in 0..d {
        for j in 0..d {
            z[i] += rate * g_sqrt[(i, j)] * (est[j] - truth[j]);
        }
    }
    z
}

fn se_from_cov(cov: &Option<Vec<Vec<f64>>>, d: usize) -> Vec<f64> {
    match cov {
        Some(c) => (0..d).map(|k| c[k][k].max(0.0).sqrt()).collect(),
        None => vec![f64::NAN; d],
    }
}

fn cover_flags(ci: &Option<Vec<(f64, f64)>>, truth: &[f64]) -> Vec<bool> {
    match ci {
        Some(iv) => iv
            .iter()
            .zip(truth)
            .map(|(&(lo, hi), &t)| lo <= t && t <= hi)
            .collect(),
        None => vec![false; truth.len()],
    }
}

fn failed_row(
    rep: usize,
    seed: u64,
    n: usize,
    h_n: f64,
    d1: usize,
    d2: usize,
    msg: String,
) -> RepRow {
    RepRow {
        rep,
        seed,
        ok: false,
        n,
        h_n,
        m1: 0,
        m2: 0,
        r_n: f64::NAN,
        rho_bar: f64::NAN,
        boundary: false,
        used_gls: false,
        evals1: 0,
        evals2: 0,
        h1: f64::NAN,
        h2: f64::NAN,
        sigma_hat: vec![f64::NAN; d1],
        theta_hat: vec![f64::NAN; d2],
        se_plugin_sigma: vec![f64::NAN; d1],
        se_plugin_theta: vec![f64::NAN; d2],
        se_observed_sigma: vec![f64::NAN; d1],
        se_observed_theta: vec![f64::NAN; d2],
        z_sigma: vec![f64::NAN; d1],
        z_theta: vec![f64::NAN; d2],
        cover_sigma: vec![false; d1],
        cover_theta: vec![false; d2],
        error: Some(msg),
    }
}

/// Run one simulate + estimate replication.
fn run_replication(
    rep: usize,
    base_seed: u64,
    cfg: &ExperimentConfig,
    model: &CoefficientModel,
    constants: &SchemeConstants,
    theory: &TheoryContext,
) -> RepRow {
    let d1 = theory.sigma0.len();
    let d2 = theory.theta0.len();
    let seed = sub_seed(base_seed, rep as u64);
    let inner = || -> Result<RepRow, CliError> {
        let generator = cfg.generator()?;
        let scheme = generator.generate(cfg.sampling.n, cfg.h_n(), sub_seed(seed, 1))?;
        let overlap = build_overlap(&scheme);
        let dx = simulate_increments(
            &scheme,
            &overlap,
            model,
            &theory.sigma0,
            &theory.theta0,
            sub_seed(seed, 2),
        )?;
        let report = estimate(
            &dx,
            &scheme,
            &overlap,
            model,
            &cfg.optimizer(),
            Some(constants),
        )?;
        let n = scheme.n() as f64;
        let t_n = scheme.t_n();
        let z_sigma = standardize(n.sqrt(), &theory.g1_sqrt, &report.sigma_hat, &theory.sigma0);
        let z_theta = standardize(t_n.sqrt(), &theory.g2_sqrt, &report.theta_hat, &theory.theta0);
        let boundary = report.stage1.boundary.iter().any(|&b| b)
            || report.stage2.boundary.iter().any(|&b| b);
        Ok(RepRow {
            rep,
            seed,
            ok: true,
            n: scheme.n(),
            h_n: scheme.h_n(),
            m1: report.m1,
            m2: report.m2,
            r_n: report.r_n,
            rho_bar: report.rho_bar,
            boundary,
            used_gls: report.stage2.used_gls,
            evals1: report.stage1.evals,
            evals2: report.stage2.evals,
            h1: report.h1_value,
            h2: report.h2_value,
            se_plugin_sigma: se_from_cov(&report.plugin_cov_sigma, d1),
            se_plugin_theta: se_from_cov(&report.plugin_cov_theta, d2),
            se_observed_sigma: se_from_cov(&report.observed_cov_sigma, d1),
            se_observed_theta: se_from_cov(&report.observed_cov_theta, d2),
            cover_sigma: cover_flags(&report.ci95_sigma, &theory.sigma0),
            cover_theta: cover_flags(&report.ci95_theta, &theory.theta0),
            z_sigma,
            z_theta,
            sigma_hat: report.sigma_hat,
            theta_hat: report.theta_hat,
            error: None,
        })
    };
    match inner() {
        Ok(row) => row,
        Err(e) => failed_row(rep, seed, cfg.sampling.n, cfg.h_n(), d1, d2, e.message),
    }
}

fn csv_escape(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

/// Stable CSV header for the replication table.
pub fn csv_header(d1: usize, d2: usize) -> String {
    let mut cols = vec![
        "rep".to_string(),
        "seed".into(),
        "ok".into(),
        "n".into(),
        "h_n".into(),
        "m1".into(),
        "m2".into(),
        "r_n".into(),
        "rho_bar".into(),
        "boundary".into(),
        "used_gls".into(),
        "evals1".into(),
        "evals2".into(),
        "h1".into(),
        "h2".into(),
    ];
    let push_block = |cols: &mut Vec<String>, stem: &str, d: usize| {
        for k in 0..d {
            cols.push(format!("{stem}_{k}"));
        }
    };
    push_block(&mut cols, "sigma_hat", d1);
    push_block(&mut cols, "theta_hat", d2);
    push_block(&mut cols, "se_plugin_sigma", d1);
    push_block(&mut cols, "se_plugin_theta", d2);
    push_block(&mut cols, "se_observed_sigma", d1);
    push_block(&mut cols, "se_observed_theta", d2);
    push_block(&mut cols, "z_sigma", d1);
    push_block(&mut cols, "z_theta", d2);
    push_block(&mut cols, "cover_sigma", d1);
    push_block(&mut cols, "cover_theta", d2);
    cols.push("error".into());
    cols.join(",")
}

fn csv_row(row: &RepRow) -> String {
    let mut fields: Vec<String> = vec![
        row.rep.to_string(),
        row.seed.to_string(),
        (row.ok as u8).to_string(),
        row.n.to_string(),
        format!("{}", row.h_n),
        row.m1.to_string(),
        row.m2.to_string(),
        format!("{}", row.r_n),
        format!("{}", row.rho_bar),
        (row.boundary as u8).to_string(),
        (row.used_gls as u8).to_string(),
        row.evals1.to_string(),
        row.evals2.to_string(),
        format!("{}", row.h1),
        format!("{}", row.h2),
    ];
    let push_f = |fields: &mut Vec<String>, xs: &[f64]| {
        for x in xs {
            fields.push(format!("{x}"));
        }
    };
    let push_b = |fields: &mut Vec<String>, xs: &[bool]| {
        for x in xs {
            fields.push((*x as u8).to_string());
        }
    };
    push_f(&mut fields, &row.sigma_hat);
    push_f(&mut fields, &row.theta_hat);
    push_f(&mut fields, &row.se_plugin_sigma);
    push_f(&mut fields, &row.se_plugin_theta);
    push_f(&mut fields, &row.se_observed_sigma);
    push_f(&mut fields, &row.se_observed_theta);
    push_f(&mut fields, &row.z_sigma);
    push_f(&mut fields, &row.z_theta);
    push_b(&mut fields, &row.cover_sigma);
    push_b(&mut fields, &row.cover_theta);
    fields.push(row.error.as_deref().map(csv_escape).unwrap_or_default());
    fields.join(",")
}

fn aggregate(rows: &[&RepRow], theory: &TheoryContext) -> McAggregates {
    let d1 = theory.sigma0.len();
    let d2 = theory.theta0.len();
    let mut sigma = Vec::with_capacity(d1);
    let mut theta = Vec::with_capacity(d2);
    for k in 0..d1 {
        let est: Vec<f64> = rows.iter().map(|r| r.sigma_hat[k]).collect();
        let z: Vec<f64> = rows.iter().map(|r| r.z_sigma[k]).collect();
        let hits: Vec<bool> = rows.iter().map(|r| r.cover_sigma[k]).collect();
        sigma.push(coordinate_summary(
            &format!("sigma_{k}"),
            theory.sigma0[k],
            &est,
            &z,
            &hits,
            Some(theory.sd_theory_sigma[k]),
        ));
    }
    for k in 0..d2 {
        let est: Vec<f64> = rows.iter().map(|r| r.theta_hat[k]).collect();
        let z: Vec<f64> = rows.iter().map(|r| r.z_theta[k]).collect();
        let hits: Vec<bool> = rows.iter().map(|r| r.cover_theta[k]).collect();
        theta.push(coordinate_summary(
            &format!("theta_{k}"),
            theory.theta0[k],
            &est,
            &z,
            &hits,
            Some(theory.sd_theory_theta[k]),
        ));
    }
    McAggregates {
        replications_used: rows.len(),
        sigma,
        theta,
    }
}

fn mat_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.rows)
        .map(|i| (0..m.cols).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Monte Carlo study: parallel simulate + estimate replications, CSV rows,
/// and aggregate distributional diagnostics against the theoretical law.
pub fn cmd_mc(mut cfg: ExperimentConfig, ov: &Overrides) -> Result<RunSummary, CliError> {
    let start = Instant::now();
    apply_overrides(&mut cfg, ov);
    cfg.require_true_values()?;
    let model = cfg.build_model()?;
    let mut warnings = Vec::new();
    if cfg.run.replications < 50 {
        warnings.push(format!(
            "run.replications = {} is below the recommended minimum of 50",
            cfg.run.replications
        ));
    }
    let constants = cfg.resolve_constants(&model)?.ok_or_else(|| {
        CliError::config("mc needs scheme constants (asymptotics.constants must not be \"none\")")
    })?;
    let n = cfg.sampling.n;
    let h_n = cfg.h_n();
    let theory = theory_context(&model, &constants, n, h_n)?;

    let reps = cfg.run.replications;
    let base_seed = cfg.run.base_seed;
    let rows: Vec<RepRow> = pool(cfg.run.workers)?.install(|| {
        (0..reps)
            .into_par_iter()
            .map(|rep| run_replication(rep, base_seed, &cfg, &model, &constants, &theory))
            .collect()
    });

    ensure_out_dir(&cfg.output.dir)?;
    let csv_path = cfg.output.dir.join("mc_rows.csv");
    {
        let d1 = theory.sigma0.len();
        let d2 = theory.theta0.len();
        let mut text = csv_header(d1, d2);
        text.push('\n');
        for row in &rows {
            text.push_str(&csv_row(row));
            text.push('\n');
        }
        std::fs::write(&csv_path, text)?;
    }

    let ok_rows: Vec<&RepRow> = rows.iter().filter(|r| r.ok).collect();
    let failed = rows.len() - ok_rows.len();
    if rows.len() >= 10 && failed * 10 > rows.len() {
        return Err(CliError::run(format!(
            "{failed} of {} replications failed (more than 10%)",
            rows.len()
        )));
    }
    let interior: Vec<&RepRow> = ok_rows.iter().copied().filter(|r| !r.boundary).collect();
    let boundary_hits = ok_rows.len() - interior.len();
    if ok_rows.is_empty() {
        return Err(CliError::run("no replication succeeded"));
    }
    if cfg.run.replications == 1 {
        warnings.push("single replication: dispersion fields are null".into());
    }

    let summary = RunSummary {
        software_version: VERSION.into(),
        csv_path: csv_path.clone(),
        n,
        h_n,
        t_n: n as f64 * h_n,
        replications: reps,
        completed: ok_rows.len(),
        failed,
        boundary_hits,
        gamma1: mat_rows(&theory.g1),
        gamma2: mat_rows(&theory.g2),
        aggregates: aggregate(&ok_rows, &theory),
        aggregates_interior: aggregate(&interior, &theory),
        wall_clock_secs: start.elapsed().as_secs_f64(),
        config_fingerprint: cfg.fingerprint(),
        warnings,
    };
    write_json(&cfg.output.dir.join("mc_summary.json"), &summary)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// constants
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct ConstantsOutput {
    pub software_version: String,
    pub generator: String,
    pub n: usize,
    pub h_n: f64,
    pub p_max: usize,
    pub replications: usize,
    pub constants: SchemeConstants,
    /// Empirical proxies for the count-moment and empty-gap conditions,
    /// averaged over the replication draws.
    pub counting_diagnostics: CountingDiagnostics,
    pub config_fingerprint: String,
}

/// Estimate the scheme constants of the configured generator and write them
/// (with standard errors and counting diagnostics) as JSON.
pub fn cmd_constants(mut cfg: ExperimentConfig, ov: &Overrides) -> Result<ConstantsOutput, CliError> {
    apply_overrides(&mut cfg, ov);
    let model = cfg.build_model()?;
    let generator = cfg.generator()?;
    let n = cfg.sampling.n;
    let h_n = cfg.h_n();
    let p_max = cfg.p_max(&model);
    let reps = cfg.run.replications.max(2);
    let windows = WindowPartition::unit(n as f64 * h_n);
    let constants = estimate_constants(
        &generator,
        reps,
        p_max,
        n,
        h_n,
        &windows,
        cfg.run.base_seed,
    )?;

    // average the counting diagnostics over a bounded number of draws
    let diag_draws = reps.min(50);
    let mut acc: Option<CountingDiagnostics> = None;
    for d in 0..diag_draws {
        let scheme = generator.generate(n, h_n, sub_seed(cfg.run.base_seed, d as u64))?;
        let diag = counting_diagnostics(&scheme);
        acc = Some(match acc {
            None => diag,
            Some(mut a) => {
                for l in 0..2 {
                    for k in 0..3 {
                        a.count_moments[l][k] += diag.count_moments[l][k];
                    }
                    for k in 0..4 {
                        a.empty_window_freq[l][k] += diag.empty_window_freq[l][k];
                    }
                }
                a
            }
        });
    }
    let mut diagnostics = acc.expect("at least one draw");
    for l in 0..2 {
        for k in 0..3 {
            diagnostics.count_moments[l][k] /= diag_draws as f64;
        }
        for k in 0..4 {
            diagnostics.empty_window_freq[l][k] /= diag_draws as f64;
        }
    }

    let out = ConstantsOutput {
        software_version: VERSION.into(),
        generator: cfg.sampling.generator.clone(),
        n,
        h_n,
        p_max,
        replications: reps,
        constants,
        counting_diagnostics: diagnostics,
        config_fingerprint: cfg.fingerprint(),
    };
    ensure_out_dir(&cfg.output.dir)?;
    // the constants themselves go to a file the estimate/mc commands can load
    write_json(&cfg.output.dir.join("constants.json"), &out.constants)?;
    write_json(&cfg.output.dir.join("constants_report.json"), &out)?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// lan
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct LanOutput {
    pub software_version: String,
    pub u: Vec<f64>,
    pub n: usize,
    pub h_n: f64,
    pub summary: LanSummary,
    pub config_fingerprint: String,
}

/// Likelihood-ratio experiment under the local perturbation alpha_0 + eps_n u.
pub fn cmd_lan(mut cfg: ExperimentConfig, ov: &Overrides) -> Result<LanOutput, CliError> {
    apply_overrides(&mut cfg, ov);
    cfg.require_true_values()?;
    let lan_block = cfg
        .lan
        .clone()
        .ok_or_else(|| CliError::config("[lan] block with the direction u is required"))?;
    let model = cfg.build_model()?;
    let constants = cfg.resolve_constants(&model)?.ok_or_else(|| {
        CliError::config("lan needs scheme constants (asymptotics.constants must not be \"none\")")
    })?;
    let generator = cfg.generator()?;
    let lan_cfg = LanConfig {
        u: lan_block.u.clone(),
        n: cfg.sampling.n,
        h_n: cfg.h_n(),
        replications: cfg.run.replications,
        base_seed: cfg.run.base_seed,
    };
    if lan_cfg.replications < 2 {
        return Err(CliError::config("lan needs run.replications >= 2"));
    }
    let (sigma_pert, theta_pert) = lan_perturbation(&model, &constants, &lan_cfg)?;
    let ratios: Vec<f64> = pool(cfg.run.workers)?.install(|| {
        (0..lan_cfg.replications)
            .into_par_iter()
            .map(|r| {
                lan_log_ratio(&model, &generator, &lan_cfg, &sigma_pert, &theta_pert, r as u64)
                    .map_err(CliError::from)
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    let summary = summarize_lan(&ratios, &lan_cfg.u, sigma_pert, theta_pert);
    let out = LanOutput {
        software_version: VERSION.into(),
        u: lan_block.u,
        n: cfg.sampling.n,
        h_n: cfg.h_n(),
        summary,
        config_fingerprint: cfg.fingerprint(),
    };
    ensure_out_dir(&cfg.output.dir)?;
    write_json(&cfg.output.dir.join("lan.json"), &out)?;
    Ok(out)
}
