//! Limit objects of the estimation problem: the correlation series A(rho),
//! the information matrices Gamma_1 and Gamma_2, the identifiability
//! functionals Y_1 and Y_2, the local scaling matrix epsilon_n, and the
//! empirical local-asymptotic-normality experiment.
//!
//! All reference parameters are explicit arguments, so the same code serves
//! the true values (theory checks) and the estimates (plug-in standard
//! errors).  Series are truncated at the constants' p_max with certified
//! geometric tail bounds driven by a_p <= a_1.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::estimator::h_joint;
use crate::gaussian::simulate_with_operator;
use crate::linalg::{inv_sqrt_spd, min_eigenvalue, Mat};
use crate::model::{CoefficientModel, TimeStructure};
use crate::rng::sub_seed;
use crate::sampling::{build_overlap, SchemeConstants, SchemeGenerator};
#[allow(unused_imports)]
use num_traits::Float;

/// Truncation order needed so that rho_max^{2 p_max} < 1e-12, never below 40.
pub fn p_max_policy(rho_max: f64) -> usize {
    if rho_max <= 0.0 {
        return 40;
    }
    let needed = (1e-12_f64.ln() / (2.0 * rho_max.ln())).ceil();
    (needed as usize).clamp(40, 512)
}

// ---------------------------------------------------------------------------
// The correlation series A(rho) and relatives
// ---------------------------------------------------------------------------

/// Truncated series value together with its certified geometric tail bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub tail_bound: f64,
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho.abs() < 1.0) {
        return Err(CoreError::RhoOutOfRange { rho });
    }
    Ok(())
}

/// A(rho) = sum_{p >= 1} a_p rho^{2p}, or its rho-derivative for
/// `derivative_order = 1`, with a tail bound from a_p <= a_1.
pub fn a_series(rho: f64, constants: &SchemeConstants, derivative_order: usize) -> Result<SeriesValue> {
    check_rho(rho)?;
    if derivative_order > 1 {
        return Err(CoreError::UnsupportedOrder {
            order: derivative_order,
        });
    }
    let p_max = constants.p_max();
    let a1 = constants.a.first().copied().unwrap_or(0.0);
    let r2 = rho * rho;
    let mut value = 0.0;
    let mut pow = r2; // rho^{2p}
    for p in 1..=p_max {
        let ap = constants.a[p - 1];
        if derivative_order == 0 {
            value += ap * pow;
        } else {
            value += ap * 2.0 * p as f64 * pow / rho.abs().max(f64::MIN_POSITIVE) * rho.signum();
        }
        pow *= r2;
    }
    // handle rho = 0 cleanly for the derivative (series is odd in rho)
    if derivative_order == 1 && rho == 0.0 {
        value = 0.0;
    }
    let x = rho.abs();
    let tail_bound = if derivative_order == 0 {
        a1 * x.powi(2 * (p_max as i32 + 1)) / (1.0 - r2)
    } else {
        // sum_{p > P} 2p x^{2p-1} = d/dx [x^{2P+2} / (1 - x^2)]
        let p = p_max as f64;
        a1 * ((2.0 * p + 2.0) * x.powi(2 * p_max as i32 + 1) * (1.0 - r2)
            + 2.0 * x.powi(2 * p_max as i32 + 3))
            / ((1.0 - r2) * (1.0 - r2))
    };
    Ok(SeriesValue { value, tail_bound })
}

/// A(rho) / rho^2 = sum a_p rho^{2p-2}; finite at rho = 0.
fn a2_series(rho: f64, constants: &SchemeConstants) -> f64 {
    let r2 = rho * rho;
    let mut value = 0.0;
    let mut pow = 1.0;
    for &ap in &constants.a {
        value += ap * pow;
        pow *= r2;
    }
    value
}

/// dA/drho / rho = sum 2p a_p rho^{2p-2}; finite at rho = 0.
fn a1_over_rho_series(rho: f64, constants: &SchemeConstants) -> f64 {
    let r2 = rho * rho;
    let mut value = 0.0;
    let mut pow = 1.0;
    for (p, &ap) in constants.a.iter().enumerate() {
        value += 2.0 * (p + 1) as f64 * ap * pow;
        pow *= r2;
    }
    value
}

/// F(x) = sum_{p >= 0} f_p x^p for one of the f constant families.
fn f_series(x: f64, f: &[f64]) -> f64 {
    let mut value = 0.0;
    let mut pow = 1.0;
    for &fp in f {
        value += fp * pow;
        pow *= x;
    }
    value
}

// ---------------------------------------------------------------------------
// Time averaging
// ---------------------------------------------------------------------------

/// Averaging horizon for coefficients without special time structure.
pub const DEFAULT_AVERAGE_HORIZON: f64 = 100.0;

fn average<F>(model: &CoefficientModel, horizon_override: Option<f64>, mut f: F) -> Result<Mat>
where
    F: FnMut(f64) -> Result<Mat>,
{
    match (model.time_structure(), horizon_override) {
        (TimeStructure::Constant, None) => f(0.0),
        (TimeStructure::Periodic { period }, None) => midpoint_average(period, 256, &mut f),
        (TimeStructure::General, None) => {
            midpoint_average(DEFAULT_AVERAGE_HORIZON, 512, &mut f)
        }
        (_, Some(t_avg)) => midpoint_average(t_avg, 512, &mut f),
    }
}

fn midpoint_average<F>(horizon: f64, points: usize, f: &mut F) -> Result<Mat>
where
    F: FnMut(f64) -> Result<Mat>,
{
    let mut acc: Option<Mat> = None;
    for k in 0..points {
        let t = horizon * (k as f64 + 0.5) / points as f64;
        let m = f(t)?;
        acc = Some(match acc {
            None => m,
            Some(mut a) => {
                for (x, y) in a.data.iter_mut().zip(&m.data) {
                    *x += y;
                }
                a
            }
        });
    }
    let mut a = acc.expect("points >= 1");
    for x in a.data.iter_mut() {
        *x /= points as f64;
    }
    Ok(a)
}

fn outer(u: &[f64], v: &[f64]) -> Mat {
    let mut m = Mat::zeros(u.len(), v.len());
    for i in 0..u.len() {
        for j in 0..v.len() {
            m[(i, j)] = u[i] * v[j];
        }
    }
    m
}

fn add_scaled(acc: &mut Mat, m: &Mat, c: f64) {
    for (x, y) in acc.data.iter_mut().zip(&m.data) {
        *x += c * y;
    }
}

fn check_pd(mut m: Mat) -> Result<Mat> {
    m.symmetrize();
    let min = min_eigenvalue(&m);
    if !(min > 0.0) {
        return Err(CoreError::IdentifiabilityFailure { eigenvalue: min });
    }
    Ok(m)
}

/// Normalized drift sensitivity d/dtheta phi_{l,t} at theta_ref, relative to
/// sigma_ref (finite differences on the drift).
fn d_theta_phi_at(
    model: &CoefficientModel,
    t: f64,
    sigma_ref: &[f64],
    theta_ref: &[f64],
    l: usize,
) -> Result<Vec<f64>> {
    let s = model.sigma_matrix(t, sigma_ref)?;
    let scale = 1.0 / [s[0][0], s[1][1]][l - 1].sqrt();
    let boxes = model.params().theta_box();
    let mut grad = vec![0.0; theta_ref.len()];
    let mut probe = theta_ref.to_vec();
    for k in 0..theta_ref.len() {
        let (lo, hi) = boxes[k];
        let h = crate::model::fd_step(theta_ref[k]);
        let up = (theta_ref[k] + h).min(hi);
        let dn = (theta_ref[k] - h).max(lo);
        if up <= dn {
            continue;
        }
        probe[k] = up;
        let mu_p = model.drift_at(t, &probe)?[l - 1];
        probe[k] = dn;
        let mu_m = model.drift_at(t, &probe)?[l - 1];
        probe[k] = theta_ref[k];
        grad[k] = scale * (mu_p - mu_m) / (up - dn);
    }
    Ok(grad)
}

/// phi_{l,t}(theta) relative to explicit reference parameters.
fn phi_at(
    model: &CoefficientModel,
    t: f64,
    sigma_ref: &[f64],
    theta_ref: &[f64],
    theta: &[f64],
    l: usize,
) -> Result<f64> {
    let s = model.sigma_matrix(t, sigma_ref)?;
    let mu = model.drift_at(t, theta)?[l - 1];
    let mu0 = model.drift_at(t, theta_ref)?[l - 1];
    if mu == mu0 {
        return Ok(0.0);
    }
    Ok((mu - mu0) / [s[0][0], s[1][1]][l - 1].sqrt())
}

// ---------------------------------------------------------------------------
// Gamma_1 and Gamma_2
// ---------------------------------------------------------------------------

/// Asymptotic information for sigma at the reference point (rate sqrt(n)),
/// oriented positive definite.  Errors with the offending eigenvalue when the
/// scheme constants cannot identify the parameter.
pub fn gamma1(
    model: &CoefficientModel,
    constants: &SchemeConstants,
    sigma_ref: &[f64],
) -> Result<Mat> {
    gamma1_averaged(model, constants, sigma_ref, None)
}

/// `gamma1` with an explicit numeric averaging horizon (stability probes).
pub fn gamma1_averaged(
    model: &CoefficientModel,
    constants: &SchemeConstants,
    sigma_ref: &[f64],
    horizon_override: Option<f64>,
) -> Result<Mat> {
    model.params().check_sigma(sigma_ref)?;
    let d1 = sigma_ref.len();
    let avg = average(model, horizon_override, |t| {
        let r = model.local_correlation(t, sigma_ref)?;
        check_rho(r)?;
        let du = model.d_sigma_local_correlation(t, sigma_ref)?;
        let db1 = model.d_sigma_sd_ratio(t, sigma_ref, 1)?;
        let db2 = model.d_sigma_sd_ratio(t, sigma_ref, 2)?;
        let w: Vec<f64> = db1.iter().zip(&db2).map(|(a, b)| a + b).collect();

        let a_val = a_series(r, constants, 0)?.value;
        let a2 = a2_series(r, constants);
        let a1r = a1_over_rho_series(r, constants);

        // gamma_{1,t} expanded so that rho -> 0 stays finite:
        //   (A2 - A1/rho) u u' - rho A2 (u w' + w u') + A w w'
        //   - 2 sum_l (a_0^l + A) dB_l dB_l'
        let mut g = Mat::zeros(d1, d1);
        add_scaled(&mut g, &outer(&du, &du), a2 - a1r);
        let uw = outer(&du, &w);
        let wu = outer(&w, &du);
        add_scaled(&mut g, &uw, -r * a2);
        add_scaled(&mut g, &wu, -r * a2);
        add_scaled(&mut g, &outer(&w, &w), a_val);
        add_scaled(
            &mut g,
            &outer(&db1, &db1),
            -2.0 * (constants.a0[0] + a_val),
        );
        add_scaled(
            &mut g,
            &outer(&db2, &db2),
            -2.0 * (constants.a0[1] + a_val),
        );
        Ok(g)
    })?;
    // positive-definite orientation
    let mut out = avg;
    for v in out.data.iter_mut() {
        *v = -*v;
    }
    check_pd(out)
}

/// Asymptotic information for theta at the reference point (rate sqrt(T_n)).
pub fn gamma2(
    model: &CoefficientModel,
    constants: &SchemeConstants,
    sigma_ref: &[f64],
    theta_ref: &[f64],
) -> Result<Mat> {
    gamma2_averaged(model, constants, sigma_ref, theta_ref, None)
}

pub fn gamma2_averaged(
    model: &CoefficientModel,
    constants: &SchemeConstants,
    sigma_ref: &[f64],
    theta_ref: &[f64],
    horizon_override: Option<f64>,
) -> Result<Mat> {
    model.params().check_sigma(sigma_ref)?;
    model.params().check_theta(theta_ref)?;
    let d2 = theta_ref.len();
    let avg = average(model, horizon_override, |t| {
        let r = model.local_correlation(t, sigma_ref)?;
        check_rho(r)?;
        let r2 = r * r;
        let g1 = d_theta_phi_at(model, t, sigma_ref, theta_ref, 1)?;
        let g2 = d_theta_phi_at(model, t, sigma_ref, theta_ref, 2)?;
        let mut g = Mat::zeros(d2, d2);
        add_scaled(&mut g, &outer(&g1, &g1), f_series(r2, &constants.f11));
        add_scaled(&mut g, &outer(&g2, &g2), f_series(r2, &constants.f22));
        let cross_coef = r * f_series(r2, &constants.f12);
        add_scaled(&mut g, &outer(&g1, &g2), -cross_coef);
        add_scaled(&mut g, &outer(&g2, &g1), -cross_coef);
        Ok(g)
    })?;
    check_pd(avg)
}

// ---------------------------------------------------------------------------
// Identifiability diagnostics Y_1 and Y_2
// ---------------------------------------------------------------------------

/// Limit of n^{-1}(H_n^1(sigma) - H_n^1(sigma_ref)); zero at sigma_ref and
/// negative elsewhere for identified models.
pub fn y1(
    sigma: &[f64],
    model: &CoefficientModel,
    constants: &SchemeConstants,
    sigma_ref: &[f64],
) -> Result<f64> {
    model.params().check_sigma(sigma)?;
    model.params().check_sigma(sigma_ref)?;
    let avg = average(model, None, |t| {
        let r = model.local_correlation(t, sigma)?;
        let r0 = model.local_correlation(t, sigma_ref)?;
        check_rho(r)?;
        check_rho(r0)?;
        let b1 = model.sd_ratio(t, sigma, sigma_ref, 1)?;
        let b2 = model.sd_ratio(t, sigma, sigma_ref, 2)?;
        let a_r = a_series(r, constants, 0)?.value;
        let a2_r = a2_series(r, constants);

        // int_{r0}^{r} A(rho)/rho drho, integrated termwise:
        // sum_p a_p (r^{2p} - r0^{2p}) / (2p)
        let mut int_term = 0.0;
        let (mut pow_r, mut pow_r0) = (r * r, r0 * r0);
        for (p, &ap) in constants.a.iter().enumerate() {
            int_term += ap * (pow_r - pow_r0) / (2.0 * (p + 1) as f64);
            pow_r *= r * r;
            pow_r0 *= r0 * r0;
        }

        let v = -0.5 * a_r * (b1 * b1 + b2 * b2)
            + r * a2_r * r0 * b1 * b2
            + constants.a0[0] * (0.5 - 0.5 * b1 * b1 + b1.ln())
            + constants.a0[1] * (0.5 - 0.5 * b2 * b2 + b2.ln())
            + int_term;
        let mut m = Mat::zeros(1, 1);
        m[(0, 0)] = v;
        Ok(m)
    })?;
    Ok(avg[(0, 0)])
}

/// Limit of (n h_n)^{-1}(H_n^2(theta) - H_n^2(theta_ref)); zero at theta_ref
/// and negative elsewhere for identified drifts.
pub fn y2(
    theta: &[f64],
    model: &CoefficientModel,
    constants: &SchemeConstants,
    sigma_ref: &[f64],
    theta_ref: &[f64],
) -> Result<f64> {
    model.params().check_theta(theta)?;
    let avg = average(model, None, |t| {
        let r = model.local_correlation(t, sigma_ref)?;
        check_rho(r)?;
        let r2 = r * r;
        let p1 = phi_at(model, t, sigma_ref, theta_ref, theta, 1)?;
        let p2 = phi_at(model, t, sigma_ref, theta_ref, theta, 2)?;
        let v = -0.5 * f_series(r2, &constants.f11) * p1 * p1
            - 0.5 * f_series(r2, &constants.f22) * p2 * p2
            + r * f_series(r2, &constants.f12) * p1 * p2;
        let mut m = Mat::zeros(1, 1);
        m[(0, 0)] = v;
        Ok(m)
    })?;
    Ok(avg[(0, 0)])
}

// ---------------------------------------------------------------------------
// epsilon_n and the LAN experiment
// ---------------------------------------------------------------------------

/// Block-diagonal local scaling
/// epsilon_n = diag(n^{-1/2} Gamma_1^{-1/2}, T_n^{-1/2} Gamma_2^{-1/2}).
pub fn epsilon_n(n: usize, h_n: f64, g1: &Mat, g2: &Mat) -> Result<Mat> {
    let d1 = g1.rows;
    let d2 = g2.rows;
    let s1 = inv_sqrt_spd(g1)?;
    let s2 = inv_sqrt_spd(g2)?;
    let t_n = n as f64 * h_n;
    let mut out = Mat::zeros(d1 + d2, d1 + d2);
    for i in 0..d1 {
        for j in 0..d1 {
            out[(i, j)] = s1[(i, j)] / (n as f64).sqrt();
        }
    }
    for i in 0..d2 {
        for j in 0..d2 {
            out[(d1 + i, d1 + j)] = s2[(i, j)] / t_n.sqrt();
        }
    }
    Ok(out)
}

/// Configuration of the likelihood-ratio experiment.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LanConfig {
    /// Local direction in R^{d1 + d2}.
    pub u: Vec<f64>,
    pub n: usize,
    pub h_n: f64,
    pub replications: usize,
    pub base_seed: u64,
}

/// Monte Carlo summary of the exact log-likelihood ratio under local
/// perturbation alpha_0 + epsilon_n u.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LanSummary {
    pub mean: f64,
    pub variance: f64,
    pub se_mean: f64,
    /// -|u|^2 / 2.
    pub reference_mean: f64,
    /// |u|^2.
    pub reference_variance: f64,
    pub replications: usize,
    pub sigma_perturbed: Vec<f64>,
    pub theta_perturbed: Vec<f64>,
}

/// One replication of the log-likelihood ratio; exposed so harnesses can
/// parallelize over replication indices.
pub fn lan_log_ratio(
    model: &CoefficientModel,
    generator: &SchemeGenerator,
    cfg: &LanConfig,
    sigma_pert: &[f64],
    theta_pert: &[f64],
    replication: u64,
) -> Result<f64> {
    let sigma0 = model.params().sigma0()?.to_vec();
    let theta0 = model.params().theta0()?.to_vec();
    let rep_seed = sub_seed(cfg.base_seed, replication);
    let scheme = generator.generate(cfg.n, cfg.h_n, sub_seed(rep_seed, 1))?;
    let overlap = build_overlap(&scheme);
    let op0 = crate::gaussian::assemble(&scheme, &overlap, model, &sigma0)?;
    let dx = simulate_with_operator(&scheme, model, &op0, &theta0, sub_seed(rep_seed, 2))?;
    let base = h_joint(&sigma0, &theta0, &dx, &scheme, &overlap, model)?;
    let pert = h_joint(sigma_pert, theta_pert, &dx, &scheme, &overlap, model)?;
    Ok(pert - base)
}

/// Perturbed parameters alpha_0 + epsilon_n u; config error when they leave
/// the (open) parameter boxes.
pub fn lan_perturbation(
    model: &CoefficientModel,
    constants: &SchemeConstants,
    cfg: &LanConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let sigma0 = model.params().sigma0()?.to_vec();
    let theta0 = model.params().theta0()?.to_vec();
    let d1 = sigma0.len();
    let d2 = theta0.len();
    if cfg.u.len() != d1 + d2 {
        return Err(CoreError::DimensionMismatch {
            expected: d1 + d2,
            got: cfg.u.len(),
        });
    }
    let g1 = gamma1(model, constants, &sigma0)?;
    let g2 = gamma2(model, constants, &sigma0, &theta0)?;
    let eps = epsilon_n(cfg.n, cfg.h_n, &g1, &g2)?;
    let mut delta = vec![0.0; d1 + d2];
    for i in 0..d1 + d2 {
        for j in 0..d1 + d2 {
            delta[i] += eps[(i, j)] * cfg.u[j];
        }
    }
    let sigma_pert: Vec<f64> = sigma0.iter().zip(&delta[..d1]).map(|(a, b)| a + b).collect();
    let theta_pert: Vec<f64> = theta0.iter().zip(&delta[d1..]).map(|(a, b)| a + b).collect();
    for (name, pert, boxes) in [
        ("sigma", &sigma_pert, model.params().sigma_box()),
        ("theta", &theta_pert, model.params().theta_box()),
    ] {
        for (k, (&v, &(lo, hi))) in pert.iter().zip(boxes).enumerate() {
            if !(v > lo && v < hi) {
                return Err(CoreError::ConfigError(format!(
                    "perturbed {name}[{k}] = {v} leaves the box ({lo}, {hi})"
                )));
            }
        }
    }
    Ok((sigma_pert, theta_pert))
}

/// Run the LAN experiment serially over replications.
pub fn lan_experiment(
    model: &CoefficientModel,
    generator: &SchemeGenerator,
    constants: &SchemeConstants,
    cfg: &LanConfig,
) -> Result<LanSummary> {
    if cfg.replications < 2 {
        return Err(CoreError::ConfigError(
            "LAN experiment needs at least 2 replications".into(),
        ));
    }
    let (sigma_pert, theta_pert) = lan_perturbation(model, constants, cfg)?;
    let mut ratios = Vec::with_capacity(cfg.replications);
    for r in 0..cfg.replications {
        ratios.push(lan_log_ratio(
            model,
            generator,
            cfg,
            &sigma_pert,
            &theta_pert,
            r as u64,
        )?);
    }
    Ok(summarize_lan(&ratios, &cfg.u, sigma_pert, theta_pert))
}

/// Aggregate replicate log-ratios into the summary (shared with parallel
/// harnesses that collect the ratios themselves).
pub fn summarize_lan(
    ratios: &[f64],
    u: &[f64],
    sigma_perturbed: Vec<f64>,
    theta_perturbed: Vec<f64>,
) -> LanSummary {
    let r = ratios.len() as f64;
    let mean = ratios.iter().sum::<f64>() / r;
    let variance = if ratios.len() > 1 {
        ratios.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (r - 1.0)
    } else {
        0.0
    };
    let u_norm2: f64 = u.iter().map(|x| x * x).sum();
    LanSummary {
        mean,
        variance,
        se_mean: (variance / r).sqrt(),
        reference_mean: -0.5 * u_norm2,
        reference_variance: u_norm2,
        replications: ratios.len(),
        sigma_perturbed,
        theta_perturbed,
    }
}
