//! Acceptance suite: desk-scale reproductions of the estimator's asymptotic
//! claims plus the exact-identity gates.  Each criterion prints one PASS/FAIL
//! line (run with `--nocapture` to see them on success) and asserts its
//! stated tolerance.

use std::path::PathBuf;
use std::sync::OnceLock;

use nsync_cli::config::ExperimentConfig;
use nsync_cli::runner::{cmd_lan, cmd_mc, Overrides};
use nsync_core::asymptotics::{
    gamma1, gamma2, lan_log_ratio, lan_perturbation, p_max_policy, LanConfig,
};
use nsync_core::estimator::{
    estimate, hayashi_yoshida, maximize_h1, maximize_h2, maximize_h2_simplex, OptimizerConfig,
};
use nsync_core::gaussian::{
    assemble, delta_v, gaussian_quadform_moments, logdet_series_check, simulate_increments,
    simulate_with_operator,
};
use nsync_core::linalg::{cholesky_dense, inverse_spd, Mat};
use nsync_core::model::{AffineDrift, CoefficientModel, ParamSpace, SigmaParam};
use nsync_core::rng::rng_from_seed;
use nsync_core::sampling::{
    build_overlap, estimate_constants, generate_poisson, SamplingScheme, SchemeConstants,
    SchemeGenerator, WindowPartition,
};
use rand::Rng;

fn verdict(criterion: u32, name: &str, pass: bool, details: &str) {
    println!(
        "[acceptance] criterion {criterion} ({name}): {} — {details}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} ({name}) failed: {details}");
}

fn correlation_model(rho0: f64, theta0: f64) -> CoefficientModel {
    CoefficientModel::constant(
        SigmaParam::Correlation,
        AffineDrift::common(),
        ParamSpace::new(
            vec![(-0.8, 0.8)],
            vec![(-3.0, 3.0)],
            Some(vec![rho0]),
            Some(vec![theta0]),
        )
        .unwrap(),
    )
    .unwrap()
}

/// Scheme constants of the unit-intensity Poisson generator, estimated once
/// and shared across the Monte Carlo criteria.
fn poisson_constants() -> &'static SchemeConstants {
    static CONSTANTS: OnceLock<SchemeConstants> = OnceLock::new();
    CONSTANTS.get_or_init(|| {
        let n = 600;
        let h_n = (n as f64).powf(-0.5);
        estimate_constants(
            &SchemeGenerator::Poisson {
                lambda1: 1.0,
                lambda2: 1.0,
            },
            150,
            p_max_policy(0.8),
            n,
            h_n,
            &WindowPartition::unit(n as f64 * h_n),
            777,
        )
        .unwrap()
    })
}

fn write_constants(dir: &std::path::Path) -> PathBuf {
    let path = dir.join("constants.json");
    std::fs::write(&path, serde_json::to_string(poisson_constants()).unwrap()).unwrap();
    path
}

fn mc_config(dir: &std::path::Path, n: usize, reps: usize, seed: u64) -> ExperimentConfig {
    let constants = write_constants(dir);
    ExperimentConfig::from_str(&format!(
        r#"
[model]
family = "constant"
sigma_param = "correlation"
sigma_box = [[-0.8, 0.8]]
theta_box = [[-3.0, 3.0]]
sigma0 = [0.5]
theta0 = [0.2]
drift_loadings = [[1.0, 1.0]]

[sampling]
generator = "poisson"
lambda1 = 1.0
lambda2 = 1.0
n = {n}
gamma_exponent = 0.5

[run]
replications = {reps}
base_seed = {seed}
workers = 1

[asymptotics]
constants = "{}"

[lan]
u = [0.7071067811865476, 0.7071067811865476]

[output]
dir = "{}"
"#,
        constants.display(),
        dir.join("out").display()
    ))
    .unwrap()
}

// ---------------------------------------------------------------------------

/// Criterion 1: log-det series against Cholesky and the solve identity on
/// random Poisson schemes across the correlation range.
#[test]
fn criterion_1_matrix_identities() {
    let rhos = [0.0, 0.3, 0.6, 0.8];
    let mut worst_gap_vs_bound = f64::NEG_INFINITY;
    let mut worst_solve = 0.0_f64;
    let mut rng = rng_from_seed(0xC1);
    for s in 0..50u64 {
        let n = 50 + (s as usize * 3) % 151; // n <= 200
        let h_n = (n as f64).powf(-0.5);
        let (scheme, _) = generate_poisson(1.0, 1.0, n, h_n, 10_000 + s).unwrap();
        let overlap = build_overlap(&scheme);
        for &rho in &rhos {
            let model = correlation_model(0.5, 0.2);
            let op = assemble(&scheme, &overlap, &model, &[rho]).unwrap();
            let p_max = p_max_policy(0.8).max(60);
            let check = logdet_series_check(&op, p_max).unwrap();
            let gap = (op.log_det() - check.value).abs();
            worst_gap_vs_bound = worst_gap_vs_bound.max(gap - check.tail_bound);

            let v: Vec<f64> = (0..op.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = op.solve(&v).unwrap();
            let back = op.matvec(&x);
            let scale = v.iter().map(|a| a.abs()).fold(0.0_f64, f64::max);
            let err = v
                .iter()
                .zip(&back)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max)
                / scale;
            worst_solve = worst_solve.max(err);
        }
    }
    let pass = worst_gap_vs_bound <= 1e-10 && worst_solve <= 1e-8;
    verdict(
        1,
        "matrix identities",
        pass,
        &format!(
            "worst series gap beyond certified bound {worst_gap_vs_bound:.2e}, worst solve residual {worst_solve:.2e}"
        ),
    );
}

/// Criterion 2: Gaussian quadratic-form moment formulas against Monte Carlo.
#[test]
fn criterion_2_quadform_moment_oracle() {
    // fixed case first: A = V = Id (m = 2), order 2 must equal 8 exactly
    let id = Mat::identity(2);
    let fixed = gaussian_quadform_moments(&id, &id, 2).unwrap();
    assert_eq!(fixed, 8.0, "A = V = Id order 2 must equal 8 exactly");

    let mut rng = rng_from_seed(0xC2);
    let draws = 1_000_000usize;
    let mut worst_z = 0.0_f64;
    for pair in 0..20 {
        let m = 2 + (pair % 4); // m <= 5
        let mut a = Mat::zeros(m, m);
        let mut b = Mat::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                a[(i, j)] = rng.gen_range(-1.0..1.0);
                b[(i, j)] = rng.gen_range(-1.0..1.0);
            }
        }
        let mut v = b.mul(&b.transpose());
        for i in 0..m {
            v[(i, i)] += 0.5;
        }
        let l = cholesky_dense(&v).unwrap();

        let want: Vec<f64> = (2..=4)
            .map(|k| gaussian_quadform_moments(&a, &v, k).unwrap())
            .collect();
        let mut sums = [0.0_f64; 3];
        let mut sums_sq = [0.0_f64; 3];
        let mut z = vec![0.0; m];
        let mut x = vec![0.0; m];
        for _ in 0..draws {
            for zi in z.iter_mut() {
                *zi = rng.sample(rand_distr::StandardNormal);
            }
            for i in 0..m {
                let mut s = 0.0;
                for k in 0..=i {
                    s += l[(i, k)] * z[k];
                }
                x[i] = s;
            }
            let mut q = 0.0;
            for i in 0..m {
                for j in 0..m {
                    q += x[i] * a[(i, j)] * x[j];
                }
            }
            let q2 = q * q;
            let q3 = q2 * q;
            let q4 = q2 * q2;
            sums[0] += q2;
            sums[1] += q3;
            sums[2] += q4;
            sums_sq[0] += q2 * q2;
            sums_sq[1] += q3 * q3;
            sums_sq[2] += q4 * q4;
        }
        for k in 0..3 {
            let mean = sums[k] / draws as f64;
            let var = (sums_sq[k] / draws as f64 - mean * mean).max(0.0);
            let se = (var / draws as f64).sqrt();
            let zscore = (mean - want[k]).abs() / se.max(1e-300);
            worst_z = worst_z.max(zscore);
        }
    }
    let pass = worst_z <= 5.0;
    verdict(
        2,
        "quadratic-form moment oracle",
        pass,
        &format!("20 pairs x orders 2-4, worst |MC - formula| = {worst_z:.2} SE; fixed case exact"),
    );
}

/// Criterion 3: exact simulation reproduces the assembled covariance and the
/// drift increments on a small fixed scheme.
#[test]
fn criterion_3_simulation_round_trip() {
    let scheme = SamplingScheme::new(
        vec![0.0, 0.8, 2.0, 3.0],
        vec![0.0, 0.5, 1.5, 2.2, 3.0],
        3,
        1.0,
    )
    .unwrap();
    let overlap = build_overlap(&scheme);
    let model = correlation_model(0.55, 0.3);
    let op = assemble(&scheme, &overlap, &model, &[0.55]).unwrap();
    let dv = delta_v(&scheme, &model, &[0.3]).unwrap();
    let m = op.dim();
    assert!(m <= 10);

    let mut s = Mat::zeros(m, m);
    let (diag, cross) = op.entries();
    for (i, &d) in diag.iter().enumerate() {
        s[(i, i)] = d;
    }
    for &(i, j, v) in cross {
        s[(i as usize, j as usize)] = v;
        s[(j as usize, i as usize)] = v;
    }

    let reps = 100_000usize;
    let mut mean = vec![0.0; m];
    let mut cov = Mat::zeros(m, m);
    for r in 0..reps {
        let x = simulate_with_operator(&scheme, &model, &op, &[0.3], 40_000 + r as u64)
            .unwrap()
            .values;
        for i in 0..m {
            mean[i] += x[i];
            for j in 0..m {
                cov[(i, j)] += (x[i] - dv[i]) * (x[j] - dv[j]);
            }
        }
    }
    let mut worst_cov = 0.0_f64;
    let mut worst_mean = 0.0_f64;
    for i in 0..m {
        mean[i] /= reps as f64;
        let se = (s[(i, i)] / reps as f64).sqrt();
        worst_mean = worst_mean.max((mean[i] - dv[i]).abs() / se);
        for j in 0..m {
            cov[(i, j)] /= reps as f64;
            let se = ((s[(i, i)] * s[(j, j)] + s[(i, j)] * s[(i, j)]) / reps as f64).sqrt();
            worst_cov = worst_cov.max((cov[(i, j)] - s[(i, j)]).abs() / se);
        }
    }
    let pass = worst_cov <= 5.0 && worst_mean <= 5.0;
    verdict(
        3,
        "exact-simulation round trip",
        pass,
        &format!(
            "10^5 draws, M = {m}: worst covariance deviation {worst_cov:.2} SE, worst mean deviation {worst_mean:.2} SE"
        ),
    );
}

/// Criterion 4: the limit information matrices against exact Fisher/GLS
/// information on the synchronous scheme.
#[test]
fn criterion_4_fisher_equivalence() {
    // (i) scalar scale: Gamma_1 = 4 / s0^2
    let s0 = 1.1;
    let scale = CoefficientModel::constant(
        SigmaParam::Scale,
        AffineDrift::common(),
        ParamSpace::new(
            vec![(0.3, 3.0)],
            vec![(-3.0, 3.0)],
            Some(vec![s0]),
            Some(vec![0.2]),
        )
        .unwrap(),
    )
    .unwrap();
    let sync = SchemeConstants::synchronous(300);
    let g_scale = gamma1(&scale, &sync, &[s0]).unwrap();
    let want_scale = 4.0 / (s0 * s0);
    let err_scale = (g_scale[(0, 0)] - want_scale).abs() / want_scale;

    // (ii) two-parameter (scale, correlation) against the FD information of
    // the exact Gaussian likelihood per observation
    let p0 = [1.2, 0.45];
    let two = CoefficientModel::constant(
        SigmaParam::ScaleCorrelation,
        AffineDrift::common(),
        ParamSpace::new(
            vec![(0.4, 3.0), (-0.9, 0.9)],
            vec![(-3.0, 3.0)],
            Some(p0.to_vec()),
            Some(vec![0.2]),
        )
        .unwrap(),
    )
    .unwrap();
    let g_two = gamma1(&two, &sync, &p0).unwrap();
    let sigma_of = |p: &[f64]| -> Mat {
        let (s, r) = (p[0], p[1]);
        Mat::from_rows(&[&[s * s, s * s * r], &[s * s * r, s * s]])
    };
    let s_true = sigma_of(&p0);
    let objective = |p: &[f64]| -> f64 {
        let sm = sigma_of(p);
        let inv = inverse_spd(&sm).unwrap();
        let det = sm[(0, 0)] * sm[(1, 1)] - sm[(0, 1)] * sm[(1, 0)];
        0.5 * (inv.mul(&s_true).trace() + det.ln())
    };
    let h = 1e-4;
    let mut err_two = 0.0_f64;
    for i in 0..2 {
        for j in 0..2 {
            let mut pp = p0;
            let mut pm = p0;
            let mut mp = p0;
            let mut mm = p0;
            pp[i] += h;
            pp[j] += h;
            pm[i] += h;
            pm[j] -= h;
            mp[i] -= h;
            mp[j] += h;
            mm[i] -= h;
            mm[j] -= h;
            let want =
                (objective(&pp) - objective(&pm) - objective(&mp) + objective(&mm)) / (4.0 * h * h);
            err_two = err_two.max((g_two[(i, j)] - want).abs() / want.abs().max(0.05));
        }
    }

    // (iii) Gamma_2 against the exact GLS information per unit time
    let rho0 = 0.4;
    let drift2 = CoefficientModel::constant(
        SigmaParam::Correlation,
        AffineDrift::per_coordinate(),
        ParamSpace::new(
            vec![(-0.9, 0.9)],
            vec![(-3.0, 3.0), (-3.0, 3.0)],
            Some(vec![rho0]),
            Some(vec![0.3, -0.2]),
        )
        .unwrap(),
    )
    .unwrap();
    let g2 = gamma2(&drift2, &sync, &[rho0], &[0.3, -0.2]).unwrap();
    let want2 = inverse_spd(&Mat::from_rows(&[&[1.0, rho0], &[rho0, 1.0]])).unwrap();
    let mut err_g2 = 0.0_f64;
    for i in 0..2 {
        for j in 0..2 {
            err_g2 = err_g2.max((g2[(i, j)] - want2[(i, j)]).abs() / want2[(i, j)].abs().max(0.05));
        }
    }

    let pass = err_scale <= 0.02 && err_two <= 0.02 && err_g2 <= 0.02;
    verdict(
        4,
        "Fisher equivalence",
        pass,
        &format!(
            "scale rel err {err_scale:.2e}, 2-param rel err {err_two:.2e}, GLS rel err {err_g2:.2e}"
        ),
    );
}

/// Criterion 5: asymptotic normality at desk scale — mean, dispersion,
/// coverage and KS gates for both parameters.
#[test]
fn criterion_5_asymptotic_normality_desk_scale() {
    let dir = tempfile::tempdir().unwrap();
    let reps = 400usize;
    let cfg = mc_config(dir.path(), 2000, reps, 2025);
    let summary = cmd_mc(cfg, &Overrides::default()).unwrap();

    let gate_mean = 3.0 / (reps as f64).sqrt();
    let mut pass = summary.failed == 0;
    let mut details = String::new();
    for c in summary
        .aggregates
        .sigma
        .iter()
        .chain(summary.aggregates.theta.iter())
    {
        let mean_ok = c.standardized_mean.abs() <= gate_mean;
        let ratio = c.sd_ratio.unwrap();
        let ratio_ok = (0.85..=1.15).contains(&ratio);
        let coverage = c.coverage95.unwrap();
        let coverage_ok = (0.90..=0.985).contains(&coverage);
        let ks = c.ks_distance.unwrap();
        let ks_ok = ks <= 0.08;
        pass &= mean_ok && ratio_ok && coverage_ok && ks_ok;
        details.push_str(&format!(
            "{}: mean_z {:+.3} (gate {:.3}), sd ratio {:.3}, coverage {:.3}, KS {:.3}; ",
            c.name, c.standardized_mean, gate_mean, ratio, coverage, ks
        ));
    }
    verdict(5, "asymptotic normality at n = 2000", pass, &details);
}

/// Criterion 6: the RMSE of sigma_hat strictly decreases along
/// n in {500, 2000, 8000}.
#[test]
fn criterion_6_consistency_trend() {
    let mut rmse = Vec::new();
    for (k, n) in [500usize, 2000, 8000].into_iter().enumerate() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = mc_config(dir.path(), n, 200, 3030 + k as u64);
        let summary = cmd_mc(cfg, &Overrides::default()).unwrap();
        let c = &summary.aggregates.sigma[0];
        let value = (c.bias * c.bias + c.sd_empirical.unwrap().powi(2)).sqrt();
        rmse.push((n, value));
    }
    let pass = rmse[0].1 > rmse[1].1 && rmse[1].1 > rmse[2].1;
    verdict(
        6,
        "consistency trend",
        pass,
        &format!(
            "RMSE(sigma_hat): n=500 -> {:.5}, n=2000 -> {:.5}, n=8000 -> {:.5}",
            rmse[0].1, rmse[1].1, rmse[2].1
        ),
    );
}

/// Criterion 7: LAN — the exact log-likelihood ratio under the local
/// perturbation has mean -|u|^2/2 and variance |u|^2.
#[test]
fn criterion_7_lan() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = mc_config(dir.path(), 2000, 400, 4040);
    let out = cmd_lan(cfg, &Overrides::default()).unwrap();
    let s = &out.summary;
    let mean_ok = (s.mean - s.reference_mean).abs() <= 3.0 * s.se_mean;
    let var_ok = (s.variance - s.reference_variance).abs() <= 0.10 * s.reference_variance;

    // u = 0 gives an identically zero ratio
    let model = correlation_model(0.5, 0.2);
    let lan_cfg = LanConfig {
        u: vec![0.0, 0.0],
        n: 500,
        h_n: (500.0_f64).powf(-0.5),
        replications: 5,
        base_seed: 11,
    };
    let gen = SchemeGenerator::Poisson {
        lambda1: 1.0,
        lambda2: 1.0,
    };
    let (sp, tp) = lan_perturbation(&model, poisson_constants(), &lan_cfg).unwrap();
    let zero_ok = (0..5).all(|r| {
        lan_log_ratio(&model, &gen, &lan_cfg, &sp, &tp, r).unwrap() == 0.0
    });

    let pass = mean_ok && var_ok && zero_ok;
    verdict(
        7,
        "local asymptotic normality",
        pass,
        &format!(
            "mean {:.4} vs {:.4} (se {:.4}), variance {:.4} vs {:.4}, zero-direction exact: {zero_ok}",
            s.mean, s.reference_mean, s.se_mean, s.variance, s.reference_variance
        ),
    );
}

/// Criterion 8: scheme-constant estimation — Poisson intensities recovered,
/// a_1 significantly positive, monotone a_p; synchronous constants exact.
#[test]
fn criterion_8_scheme_constants() {
    let n = 600;
    let h_n = (n as f64).powf(-0.5);
    let c = estimate_constants(
        &SchemeGenerator::Poisson {
            lambda1: 1.0,
            lambda2: 1.0,
        },
        200,
        40,
        n,
        h_n,
        &WindowPartition::unit(n as f64 * h_n),
        0xC8,
    )
    .unwrap();
    let a0_ok = (c.a0[0] - 1.0).abs() <= 3.0 * c.a0_se[0] && (c.a0[1] - 1.0).abs() <= 3.0 * c.a0_se[1];
    let a1_positive = c.a[0] > 3.0 * c.a_se[0];
    let monotone = c.a.windows(2).all(|w| w[1] <= w[0] + 1e-12);

    // synchronous generator on a dyadic grid reproduces 1 exactly
    let h = 1.0 / 64.0;
    let sync = estimate_constants(
        &SchemeGenerator::Equidistant { offset2: 0.0 },
        4,
        8,
        640,
        h,
        &WindowPartition::unit(640.0 * h),
        1,
    )
    .unwrap();
    let sync_exact = sync.a0 == [1.0, 1.0]
        && sync.a.iter().all(|&v| v == 1.0)
        && sync.f11.iter().all(|&v| v == 1.0)
        && sync.f12.iter().all(|&v| v == 1.0)
        && sync.f22.iter().all(|&v| v == 1.0)
        && sync.a_se.iter().all(|&v| v == 0.0);

    let pass = a0_ok && a1_positive && monotone && sync_exact;
    verdict(
        8,
        "scheme constants",
        pass,
        &format!(
            "a0 = [{:.4}, {:.4}] (se [{:.4}, {:.4}]), a_1 = {:.4} (se {:.4}), monotone: {monotone}, synchronous exact: {sync_exact}",
            c.a0[0], c.a0[1], c.a0_se[0], c.a0_se[1], c.a[0], c.a_se[0]
        ),
    );
}

/// Criterion 9: Hayashi-Yoshida is unbiased for the integrated cross
/// variation but strictly noisier than the quasi-likelihood estimator.
#[test]
fn criterion_9_hayashi_yoshida_baseline() {
    let rho0 = 0.5;
    let model = correlation_model(rho0, 0.0);
    let n = 1000;
    let h_n = (n as f64).powf(-0.5);
    let reps = 300u64;
    let cfg = OptimizerConfig::default();
    let mut hy_rho = Vec::with_capacity(reps as usize);
    let mut qml_rho = Vec::with_capacity(reps as usize);
    for r in 0..reps {
        let (scheme, _) = generate_poisson(1.0, 1.0, n, h_n, 90_000 + r).unwrap();
        let overlap = build_overlap(&scheme);
        let dx =
            simulate_increments(&scheme, &overlap, &model, &[rho0], &[0.0], 91_000 + r).unwrap();
        hy_rho.push(hayashi_yoshida(&dx, &overlap) / scheme.t_n());
        let stage1 = maximize_h1(&dx, &scheme, &overlap, &model, &cfg).unwrap();
        qml_rho.push(stage1.estimate[0]);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let sd = |v: &[f64]| {
        let m = mean(v);
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0)).sqrt()
    };
    let hy_mean = mean(&hy_rho);
    let hy_sd = sd(&hy_rho);
    let se = hy_sd / (reps as f64).sqrt();
    // integrated cross variation per unit time is rho0 for unit variances
    let unbiased = (hy_mean - rho0).abs() <= 3.0 * se;
    let qml_sd = sd(&qml_rho);
    let ratio = hy_sd / qml_sd;
    let pass = unbiased && ratio > 1.0;
    verdict(
        9,
        "Hayashi-Yoshida baseline",
        pass,
        &format!(
            "HY mean {hy_mean:.4} vs {rho0} (se {se:.4}); SD ratio HY/QML = {ratio:.3} (> 1 required)"
        ),
    );
}

/// Criterion 10: GLS and simplex theta-stages agree; interior sigma optima
/// have a small finite-difference gradient.
#[test]
fn criterion_10_optimizer_cross_check() {
    let tight = OptimizerConfig {
        x_tol: 1e-10,
        f_tol: 1e-14,
        max_evals: 4000,
        ..OptimizerConfig::default()
    };
    let mut worst_disagreement = 0.0_f64;
    let mut worst_grad = 0.0_f64;
    let mut interior_checked = 0usize;
    for s in 0..20u64 {
        let rho0 = -0.6 + 1.2 * (s as f64 + 0.5) / 20.0;
        let theta0 = -1.0 + 2.0 * ((s as f64 * 7.0) % 20.0) / 20.0;
        let model = correlation_model(rho0, theta0);
        let n = 150 + (s as usize % 4) * 25;
        let h_n = (n as f64).powf(-0.5);
        let (scheme, _) = generate_poisson(1.0, 1.2, n, h_n, 60_000 + s).unwrap();
        let overlap = build_overlap(&scheme);
        let dx = simulate_increments(&scheme, &overlap, &model, &[rho0], &[theta0], 61_000 + s)
            .unwrap();

        let report = estimate(&dx, &scheme, &overlap, &model, &tight, None).unwrap();
        let op = assemble(&scheme, &overlap, &model, &report.sigma_hat).unwrap();
        let gls = maximize_h2(&op, &dx, &scheme, &model, &tight).unwrap();
        assert!(gls.used_gls, "instance {s} should take the GLS path");
        let simplex = maximize_h2_simplex(&op, &dx, &scheme, &model, &tight).unwrap();
        let gap = (gls.estimate[0] - simplex.estimate[0]).abs();
        worst_disagreement = worst_disagreement.max(gap);

        if !report.stage1.boundary[0] {
            interior_checked += 1;
            let rel = report.h1_grad_norm / (1.0 + report.h1_value.abs());
            worst_grad = worst_grad.max(rel);
        }
    }
    let pass = worst_disagreement <= 1e-6 && worst_grad <= 1e-4 && interior_checked >= 15;
    verdict(
        10,
        "optimizer cross-check",
        pass,
        &format!(
            "worst GLS/simplex gap {worst_disagreement:.2e}, worst relative FD gradient {worst_grad:.2e} over {interior_checked} interior optima"
        ),
    );
}
