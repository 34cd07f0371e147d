//! Two-stage quasi-likelihood estimation: maximize H_n^1 in sigma, plug the
//! result into the covariance, then maximize H_n^2 in theta (closed-form
//! generalized least squares when the drift is linear in theta).  Also hosts
//! the Hayashi-Yoshida covariation baseline.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::asymptotics::{gamma1, gamma2};
use crate::error::{CoreError, Result};
use crate::gaussian::{assemble, delta_v, CovarianceOperator, IncrementVector};
use crate::linalg::{cholesky_dense, inverse_spd, Mat};
use crate::model::CoefficientModel;
use crate::sampling::{OverlapMatrix, SamplingScheme, SchemeConstants};
#[allow(unused_imports)]
use num_traits::Float;

const Z975: f64 = 1.959_963_984_540_054;

// ---------------------------------------------------------------------------
// Optimizer configuration and bounded Nelder-Mead
// ---------------------------------------------------------------------------

/// Knobs of the derivative-free stage maximizers.  Candidate points are
/// clamped onto the closed parameter box before evaluation.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimizerConfig {
    /// Multistart grid resolution per sigma dimension.
    pub multistart: usize,
    /// Convergence tolerance on the parameter (simplex diameter).
    pub x_tol: f64,
    /// Convergence tolerance on the objective spread.
    pub f_tol: f64,
    /// Maximum objective evaluations per start.
    pub max_evals: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            multistart: 3,
            x_tol: 1e-8,
            f_tol: 1e-10,
            max_evals: 2000,
        }
    }
}

impl OptimizerConfig {
    fn validate(&self) -> Result<()> {
        if self.multistart == 0 || !(self.x_tol > 0.0) || !(self.f_tol > 0.0) {
            return Err(CoreError::ConfigError(
                "optimizer needs positive tolerances and multistart >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of one stage maximization.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StageOutcome {
    pub estimate: Vec<f64>,
    pub objective: f64,
    pub evals: usize,
    pub converged: bool,
    /// Coordinate-wise boundary contact of the returned maximizer.
    pub boundary: Vec<bool>,
    /// Stage 2 only: whether the closed-form GLS path produced the estimate.
    pub used_gls: bool,
    /// Stage 2 only: GLS normal matrix was singular and the simplex ran instead.
    pub gls_fallback: bool,
}

fn clamp_to_box(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

fn boundary_flags(x: &[f64], bounds: &[(f64, f64)], tol_frac: f64) -> Vec<bool> {
    x.iter()
        .zip(bounds)
        .map(|(&v, &(lo, hi))| {
            let tol = tol_frac * (hi - lo);
            v - lo <= tol || hi - v <= tol
        })
        .collect()
}

struct SimplexRun {
    x: Vec<f64>,
    f: f64,
    evals: usize,
    converged: bool,
}

/// Nelder-Mead maximization over a box, candidates clamped onto the box.
/// Deterministic given the starting point.
fn simplex_maximize<F>(
    f: &mut F,
    start: &[f64],
    bounds: &[(f64, f64)],
    cfg: &OptimizerConfig,
) -> Result<SimplexRun>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let d = start.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| -> Result<f64> {
        *evals += 1;
        f(x)
    };

    // initial simplex: start plus one step along each coordinate
    let mut verts: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    verts.push(start.to_vec());
    for k in 0..d {
        let (lo, hi) = bounds[k];
        let step = 0.1 * (hi - lo);
        let mut v = start.to_vec();
        v[k] = if v[k] + step <= hi { v[k] + step } else { v[k] - step };
        verts.push(v);
    }
    let mut fvals: Vec<f64> = Vec::with_capacity(d + 1);
    for v in &verts {
        fvals.push(eval(v, &mut evals)?);
    }

    let mut converged = false;
    while evals < cfg.max_evals {
        // order descending (maximization)
        let mut idx: Vec<usize> = (0..=d).collect();
        idx.sort_by(|&a, &b| fvals[b].total_cmp(&fvals[a]));
        let best = idx[0];
        let worst = idx[d];
        let second_worst = idx[d.saturating_sub(1)];

        let spread_x = (0..d)
            .map(|k| {
                verts
                    .iter()
                    .map(|v| (v[k] - verts[best][k]).abs())
                    .fold(0.0_f64, f64::max)
            })
            .fold(0.0_f64, f64::max);
        let spread_f = (fvals[best] - fvals[worst]).abs();
        if fvals[best].is_finite()
            && spread_x <= cfg.x_tol
            && spread_f <= cfg.f_tol * (1.0 + fvals[best].abs())
        {
            converged = true;
            break;
        }
        if !fvals[best].is_finite() {
            // every vertex sits in a non-factorizable region; give up this start
            break;
        }

        // centroid of all but worst
        let mut centroid = vec![0.0; d];
        for (i, v) in verts.iter().enumerate() {
            if i == worst {
                continue;
            }
            for k in 0..d {
                centroid[k] += v[k] / d as f64;
            }
        }
        let propose = |coef: f64| -> Vec<f64> {
            let mut x = vec![0.0; d];
            for k in 0..d {
                x[k] = centroid[k] + coef * (centroid[k] - verts[worst][k]);
            }
            clamp_to_box(&mut x, bounds);
            x
        };

        let xr = propose(1.0);
        let fr = eval(&xr, &mut evals)?;
        if fr > fvals[best] {
            let xe = propose(2.0);
            let fe = eval(&xe, &mut evals)?;
            if fe > fr {
                verts[worst] = xe;
                fvals[worst] = fe;
            } else {
                verts[worst] = xr;
                fvals[worst] = fr;
            }
        } else if fr > fvals[second_worst] {
            verts[worst] = xr;
            fvals[worst] = fr;
        } else {
            let xc = propose(-0.5);
            let fc = eval(&xc, &mut evals)?;
            if fc > fvals[worst] {
                verts[worst] = xc;
                fvals[worst] = fc;
            } else {
                // shrink toward best
                for i in 0..=d {
                    if i == best {
                        continue;
                    }
                    for k in 0..d {
                        verts[i][k] = verts[best][k] + 0.5 * (verts[i][k] - verts[best][k]);
                    }
                    fvals[i] = eval(&verts[i].clone(), &mut evals)?;
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..fvals.len() {
        if fvals[i] > fvals[best] {
            best = i;
        }
    }
    Ok(SimplexRun {
        x: verts.swap_remove(best),
        f: fvals[best],
        evals,
        converged,
    })
}

/// Multistart grid: `per_dim` points per coordinate at interior fractions.
fn multistart_grid(bounds: &[(f64, f64)], per_dim: usize) -> Vec<Vec<f64>> {
    let d = bounds.len();
    let total = per_dim.pow(d as u32);
    let mut starts = Vec::with_capacity(total);
    for flat in 0..total {
        let mut x = vec![0.0; d];
        let mut rem = flat;
        for k in 0..d {
            let idx = rem % per_dim;
            rem /= per_dim;
            let (lo, hi) = bounds[k];
            x[k] = lo + (hi - lo) * (idx as f64 + 1.0) / (per_dim as f64 + 1.0);
        }
        starts.push(x);
    }
    starts
}

fn maximize_over_box<F>(
    f: &mut F,
    bounds: &[(f64, f64)],
    cfg: &OptimizerConfig,
    stage: &str,
) -> Result<StageOutcome>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    cfg.validate()?;
    let starts = multistart_grid(bounds, cfg.multistart);
    let mut best: Option<SimplexRun> = None;
    let mut total_evals = 0usize;
    let mut start_values: Vec<f64> = Vec::with_capacity(starts.len());
    for s in &starts {
        let run = simplex_maximize(f, s, bounds, cfg)?;
        total_evals += run.evals;
        start_values.push(run.f);
        let better = match &best {
            None => true,
            Some(b) => run.f > b.f,
        };
        if better {
            best = Some(run);
        }
    }
    let best = best.expect("at least one start");
    if !best.f.is_finite() {
        return Err(CoreError::EstimationFailed(format!(
            "{stage}: no start produced a finite objective"
        )));
    }
    Ok(StageOutcome {
        boundary: boundary_flags(&best.x, bounds, 1e-6),
        estimate: best.x,
        objective: best.f,
        evals: total_evals,
        converged: best.converged,
        used_gls: false,
        gls_fallback: false,
    })
}

// ---------------------------------------------------------------------------
// Quasi-likelihoods
// ---------------------------------------------------------------------------

/// H_n^1(sigma) = -1/2 DX^T S_n^{-1}(sigma) DX - 1/2 log det S_n(sigma).
/// Factorization failure maps to -inf so the optimizer retreats.
pub fn h1(
    sigma: &[f64],
    delta_x: &IncrementVector,
    scheme: &SamplingScheme,
    overlap: &OverlapMatrix,
    model: &CoefficientModel,
) -> Result<f64> {
    model.params().check_sigma(sigma)?;
    let op = match assemble(scheme, overlap, model, sigma) {
        Ok(op) => op,
        Err(CoreError::NotPositiveDefinite { .. }) => return Ok(f64::NEG_INFINITY),
        Err(e) => return Err(e),
    };
    let q = op.quad_form(&delta_x.values)?;
    Ok(-0.5 * q - 0.5 * op.log_det())
}

/// H_n^2(theta) = -1/2 (DX - DV(theta))^T S_n^{-1}(sigma_hat) (DX - DV(theta)),
/// evaluated against a covariance factored once at sigma_hat.
pub fn h2(
    theta: &[f64],
    op_sigma_hat: &CovarianceOperator,
    delta_x: &IncrementVector,
    scheme: &SamplingScheme,
    model: &CoefficientModel,
) -> Result<f64> {
    model.params().check_theta(theta)?;
    let dv = delta_v(scheme, model, theta)?;
    let resid: Vec<f64> = delta_x.values.iter().zip(&dv).map(|(x, v)| x - v).collect();
    let q = op_sigma_hat.quad_form(&resid)?;
    Ok(-0.5 * q)
}

/// Joint quasi-likelihood H_n(sigma, theta); for deterministic coefficients
/// this is the exact Gaussian log-likelihood of the increments up to an
/// additive constant.
pub fn h_joint(
    sigma: &[f64],
    theta: &[f64],
    delta_x: &IncrementVector,
    scheme: &SamplingScheme,
    overlap: &OverlapMatrix,
    model: &CoefficientModel,
) -> Result<f64> {
    model.params().check_sigma(sigma)?;
    model.params().check_theta(theta)?;
    let op = match assemble(scheme, overlap, model, sigma) {
        Ok(op) => op,
        Err(CoreError::NotPositiveDefinite { .. }) => return Ok(f64::NEG_INFINITY),
        Err(e) => return Err(e),
    };
    let dv = delta_v(scheme, model, theta)?;
    let resid: Vec<f64> = delta_x.values.iter().zip(&dv).map(|(x, v)| x - v).collect();
    let q = op.quad_form(&resid)?;
    Ok(-0.5 * q - 0.5 * op.log_det())
}

/// Stage 1: multistart bounded simplex over clos(Theta_1).
pub fn maximize_h1(
    delta_x: &IncrementVector,
    scheme: &SamplingScheme,
    overlap: &OverlapMatrix,
    model: &CoefficientModel,
    cfg: &OptimizerConfig,
) -> Result<StageOutcome> {
    let bounds = model.params().sigma_box().to_vec();
    let mut obj = |s: &[f64]| h1(s, delta_x, scheme, overlap, model);
    maximize_over_box(&mut obj, &bounds, cfg, "stage 1 (sigma)")
}

/// Stage 2: closed-form GLS when the drift is linear in theta, otherwise the
/// same bounded simplex as stage 1.  The covariance factored at sigma_hat is
/// reused across every theta evaluation.
pub fn maximize_h2(
    op_sigma_hat: &CovarianceOperator,
    delta_x: &IncrementVector,
    scheme: &SamplingScheme,
    model: &CoefficientModel,
    cfg: &OptimizerConfig,
) -> Result<StageOutcome> {
    let bounds = model.params().theta_box().to_vec();
    if model.drift_linear_in_theta() {
        match gls_solve(op_sigma_hat, delta_x, scheme, model)? {
            Some(theta) => {
                let mut clamped = theta.clone();
                clamp_to_box(&mut clamped, &bounds);
                let objective = h2(&clamped, op_sigma_hat, delta_x, scheme, model)?;
                return Ok(StageOutcome {
                    boundary: boundary_flags(&clamped, &bounds, 1e-6),
                    estimate: clamped,
                    objective,
                    evals: 1,
                    converged: true,
                    used_gls: true,
                    gls_fallback: false,
                });
            }
            None => {
                let mut out = maximize_h2_simplex(op_sigma_hat, delta_x, scheme, model, cfg)?;
                out.gls_fallback = true;
                return Ok(out);
            }
        }
    }
    maximize_h2_simplex(op_sigma_hat, delta_x, scheme, model, cfg)
}

/// Stage 2 through the bounded simplex regardless of drift linearity; the
/// GLS/simplex agreement check pits this against the closed form.
pub fn maximize_h2_simplex(
    op_sigma_hat: &CovarianceOperator,
    delta_x: &IncrementVector,
    scheme: &SamplingScheme,
    model: &CoefficientModel,
    cfg: &OptimizerConfig,
) -> Result<StageOutcome> {
    let bounds = model.params().theta_box().to_vec();
    let mut obj = |t: &[f64]| h2(t, op_sigma_hat, delta_x, scheme, model);
    maximize_over_box(&mut obj, &bounds, cfg, "stage 2 (theta)")
}

/// Unconstrained GLS maximizer of H_n^2 for drift linear in theta:
/// theta_hat solves (W^T S^{-1} W) dtheta = W^T S^{-1} (DX - DV(ref)).
/// Returns None when the normal matrix is singular.
fn gls_solve(
    op: &CovarianceOperator,
    delta_x: &IncrementVector,
    scheme: &SamplingScheme,
    model: &CoefficientModel,
) -> Result<Option<Vec<f64>>> {
    let bounds = model.params().theta_box();
    let d2 = bounds.len();
    let theta_ref: Vec<f64> = bounds.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect();
    let dv_ref = delta_v(scheme, model, &theta_ref)?;

    // design columns: exact for affine drift
    let m = delta_x.values.len();
    let mut w = Vec::with_capacity(d2);
    for k in 0..d2 {
        let (lo, hi) = bounds[k];
        let step = 0.25 * (hi - lo);
        let mut probe = theta_ref.clone();
        probe[k] += step;
        let dv_k = delta_v(scheme, model, &probe)?;
        let col: Vec<f64> = dv_k
            .iter()
            .zip(&dv_ref)
            .map(|(a, b)| (a - b) / step)
            .collect();
        w.push(col);
    }

    let resid: Vec<f64> = delta_x
        .values
        .iter()
        .zip(&dv_ref)
        .map(|(x, v)| x - v)
        .collect();

    let mut normal = Mat::zeros(d2, d2);
    let mut rhs = vec![0.0; d2];
    for k in 0..d2 {
        let u_k = op.solve(&w[k])?;
        for l in 0..d2 {
            let dot: f64 = w[l].iter().zip(&u_k).map(|(a, b)| a * b).sum();
            normal[(l, k)] = dot;
        }
        rhs[k] = resid.iter().zip(&u_k).map(|(a, b)| a * b).sum();
        debug_assert_eq!(u_k.len(), m);
    }
    normal.symmetrize();
    match crate::linalg::solve_spd(&normal, &rhs) {
        Ok(dtheta) => Ok(Some(
            theta_ref.iter().zip(&dtheta).map(|(r, d)| r + d).collect(),
        )),
        Err(CoreError::NotPositiveDefinite { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

// ---------------------------------------------------------------------------
// Full estimation
// ---------------------------------------------------------------------------

/// Everything one estimation run reports.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EstimateReport {
    pub sigma_hat: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub h1_value: f64,
    pub h2_value: f64,
    pub stage1: StageOutcome,
    pub stage2: StageOutcome,
    /// Plug-in asymptotic covariances Gamma1^{-1}/n and Gamma2^{-1}/T_n
    /// (present when scheme constants were supplied).
    pub plugin_cov_sigma: Option<Vec<Vec<f64>>>,
    pub plugin_cov_theta: Option<Vec<Vec<f64>>>,
    /// Observed-information covariances from finite-difference Hessians of
    /// the two stage objectives at the optimum.
    pub observed_cov_sigma: Option<Vec<Vec<f64>>>,
    pub observed_cov_theta: Option<Vec<Vec<f64>>>,
    /// Two-sided 95% confidence intervals (plug-in covariance when present,
    /// observed-information otherwise).
    pub ci95_sigma: Option<Vec<(f64, f64)>>,
    pub ci95_theta: Option<Vec<(f64, f64)>>,
    /// Norm of the finite-difference gradient of H_n^1 at sigma_hat.
    pub h1_grad_norm: f64,
    pub m1: usize,
    pub m2: usize,
    pub r_n: f64,
    pub rho_bar: f64,
    pub warnings: Vec<String>,
}

fn mat_to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.rows)
        .map(|i| (0..m.cols).map(|j| m[(i, j)]).collect())
        .collect()
}

fn ci_from_cov(est: &[f64], cov: &[Vec<f64>]) -> Vec<(f64, f64)> {
    est.iter()
        .enumerate()
        .map(|(k, &x)| {
            let se = cov[k][k].max(0.0).sqrt();
            (x - Z975 * se, x + Z975 * se)
        })
        .collect()
}

/// Finite-difference Hessian of a scalar function at x, steps clipped so the
/// probes stay inside the box; None when x touches the boundary.
fn fd_hessian<F>(f: &mut F, x: &[f64], bounds: &[(f64, f64)]) -> Result<Option<Mat>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let d = x.len();
    let mut h = vec![0.0; d];
    for k in 0..d {
        let (lo, hi) = bounds[k];
        let step = 1e-4 * (1.0 + x[k].abs());
        if x[k] - step < lo || x[k] + step > hi {
            return Ok(None);
        }
        h[k] = step;
    }
    let f0 = f(x)?;
    let mut hess = Mat::zeros(d, d);
    let mut probe = x.to_vec();
    for i in 0..d {
        probe[i] = x[i] + h[i];
        let fp = f(&probe)?;
        probe[i] = x[i] - h[i];
        let fm = f(&probe)?;
        probe[i] = x[i];
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            probe[i] = x[i] + h[i];
            probe[j] = x[j] + h[j];
            let fpp = f(&probe)?;
            probe[j] = x[j] - h[j];
            let fpm = f(&probe)?;
            probe[i] = x[i] - h[i];
            let fmm = f(&probe)?;
            probe[j] = x[j] + h[j];
            let fmp = f(&probe)?;
            probe[i] = x[i];
            probe[j] = x[j];
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok(Some(hess))
}

fn fd_gradient_norm<F>(f: &mut F, x: &[f64], bounds: &[(f64, f64)]) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut norm2 = 0.0;
    let mut probe = x.to_vec();
    for k in 0..x.len() {
        let (lo, hi) = bounds[k];
        let step = 1e-5 * (1.0 + x[k].abs());
        let up = (x[k] + step).min(hi);
        let dn = (x[k] - step).max(lo);
        if up <= dn {
            continue;
        }
        probe[k] = up;
        let fp = f(&probe)?;
        probe[k] = dn;
        let fm = f(&probe)?;
        probe[k] = x[k];
        let g = (fp - fm) / (up - dn);
        norm2 += g * g;
    }
    Ok(norm2.sqrt())
}

fn neg_hessian_cov(hess: &Mat) -> Option<Mat> {
    let d = hess.rows;
    let mut neg = Mat::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            neg[(i, j)] = -hess[(i, j)];
        }
    }
    if cholesky_dense(&neg).is_err() {
        return None;
    }
    inverse_spd(&neg).ok()
}

/// Run both stages and fill the report.  Plug-in standard errors use the
/// supplied scheme constants at the estimated parameters; observed-information
/// standard errors come from finite-difference Hessians of the objectives.
pub fn estimate(
    delta_x: &IncrementVector,
    scheme: &SamplingScheme,
    overlap: &OverlapMatrix,
    model: &CoefficientModel,
    cfg: &OptimizerConfig,
    constants: Option<&SchemeConstants>,
) -> Result<EstimateReport> {
    let mut warnings = Vec::new();

    let stage1 = maximize_h1(delta_x, scheme, overlap, model, cfg)
        .map_err(|e| stage_tagged("stage 1 (sigma)", e))?;
    let sigma_hat = stage1.estimate.clone();

    let op_hat = assemble(scheme, overlap, model, &sigma_hat)
        .map_err(|e| stage_tagged("stage 2 (factor at sigma_hat)", e))?;
    let stage2 = maximize_h2(&op_hat, delta_x, scheme, model, cfg)
        .map_err(|e| stage_tagged("stage 2 (theta)", e))?;
    let theta_hat = stage2.estimate.clone();
    if stage2.gls_fallback {
        warnings.push("GLS normal matrix singular; simplex fallback used".into());
    }

    let n = scheme.n() as f64;
    let t_n = scheme.t_n();

    let mut plugin_cov_sigma = None;
    let mut plugin_cov_theta = None;
    if let Some(c) = constants {
        match gamma1(model, c, &sigma_hat) {
            Ok(g1) => match inverse_spd(&g1) {
                Ok(mut inv) => {
                    for v in inv.data.iter_mut() {
                        *v /= n;
                    }
                    plugin_cov_sigma = Some(mat_to_rows(&inv));
                }
                Err(e) => warnings.push(format!("plug-in Gamma1 not invertible: {e}")),
            },
            Err(e) => warnings.push(format!("plug-in Gamma1 evaluation failed: {e}")),
        }
        match gamma2(model, c, &sigma_hat, &theta_hat) {
            Ok(g2) => match inverse_spd(&g2) {
                Ok(mut inv) => {
                    for v in inv.data.iter_mut() {
                        *v /= t_n;
                    }
                    plugin_cov_theta = Some(mat_to_rows(&inv));
                }
                Err(e) => warnings.push(format!("plug-in Gamma2 not invertible: {e}")),
            },
            Err(e) => warnings.push(format!("plug-in Gamma2 evaluation failed: {e}")),
        }
    }

    let sigma_bounds = model.params().sigma_box().to_vec();
    let theta_bounds = model.params().theta_box().to_vec();

    let mut h1_obj = |s: &[f64]| h1(s, delta_x, scheme, overlap, model);
    let observed_cov_sigma = fd_hessian(&mut h1_obj, &sigma_hat, &sigma_bounds)?
        .and_then(|h| neg_hessian_cov(&h))
        .map(|m| mat_to_rows(&m));
    let h1_grad_norm = fd_gradient_norm(&mut h1_obj, &sigma_hat, &sigma_bounds)?;

    let mut h2_obj = |t: &[f64]| h2(t, &op_hat, delta_x, scheme, model);
    let observed_cov_theta = fd_hessian(&mut h2_obj, &theta_hat, &theta_bounds)?
        .and_then(|h| neg_hessian_cov(&h))
        .map(|m| mat_to_rows(&m));

    let ci95_sigma = plugin_cov_sigma
        .as_ref()
        .or(observed_cov_sigma.as_ref())
        .map(|cov| ci_from_cov(&sigma_hat, cov));
    let ci95_theta = plugin_cov_theta
        .as_ref()
        .or(observed_cov_theta.as_ref())
        .map(|cov| ci_from_cov(&theta_hat, cov));

    Ok(EstimateReport {
        h1_value: stage1.objective,
        h2_value: stage2.objective,
        sigma_hat,
        theta_hat,
        stage1,
        stage2,
        plugin_cov_sigma,
        plugin_cov_theta,
        observed_cov_sigma,
        observed_cov_theta,
        ci95_sigma,
        ci95_theta,
        h1_grad_norm,
        m1: scheme.m(1),
        m2: scheme.m(2),
        r_n: scheme.max_gap(),
        rho_bar: op_hat.rho_bar(),
        warnings,
    })
}

fn stage_tagged(stage: &str, e: CoreError) -> CoreError {
    match e {
        CoreError::EstimationFailed(msg) => CoreError::EstimationFailed(msg),
        other => CoreError::EstimationFailed(format!("{stage}: {other}")),
    }
}

// ---------------------------------------------------------------------------
// Hayashi-Yoshida baseline
// ---------------------------------------------------------------------------

/// Sum of increment products over overlapping interval pairs; the
/// covariation baseline for nonsynchronous data.
pub fn hayashi_yoshida(delta_x: &IncrementVector, overlap: &OverlapMatrix) -> f64 {
    let d1 = delta_x.coordinate(1);
    let d2 = delta_x.coordinate(2);
    overlap
        .entries()
        .map(|(i, j, _, _)| d1[i] * d2[j])
        .sum()
}
