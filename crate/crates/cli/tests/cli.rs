//! Binary-level tests: exit codes, file formats, and the determinism
//! contracts of the experiment harness.

use std::path::Path;
use std::process::{Command, Output};

fn nsync() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nsync"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn base_config(out_dir: &Path) -> String {
    format!(
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
n = 80
gamma_exponent = 0.5

[run]
replications = 12
base_seed = 5

[asymptotics]
constants = "synchronous"

[lan]
u = [0.0, 0.0]

[output]
dir = "{}"
"#,
        out_dir.display()
    )
}

fn run_ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");

    // unparsable document
    write(&cfg, "this is not toml at all = [");
    let out = nsync().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // n too small
    write(
        &cfg,
        &base_config(dir.path()).replace("n = 80", "n = 5"),
    );
    let out = nsync().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sampling.n"));

    // gamma exponent outside (0, 1)
    write(
        &cfg,
        &base_config(dir.path()).replace("gamma_exponent = 0.5", "gamma_exponent = 1.5"),
    );
    let out = nsync().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // missing true values for a simulation command
    write(
        &cfg,
        &base_config(dir.path()).replace("sigma0 = [0.5]\n", ""),
    );
    let out = nsync().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.sigma0"));

    // unknown field is rejected
    write(
        &cfg,
        &(base_config(dir.path()) + "\n[bogus]\nx = 1\n"),
    );
    let out = nsync().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_is_idempotent_and_estimate_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    write(&cfg, &base_config(&dir.path().join("out")));

    run_ok(nsync().args(["simulate", "--config"]).arg(&cfg).output().unwrap());
    let scheme1 = std::fs::read(dir.path().join("out/scheme.txt")).unwrap();
    let incr1 = std::fs::read(dir.path().join("out/increments.txt")).unwrap();

    run_ok(nsync().args(["simulate", "--config"]).arg(&cfg).output().unwrap());
    let scheme2 = std::fs::read(dir.path().join("out/scheme.txt")).unwrap();
    let incr2 = std::fs::read(dir.path().join("out/increments.txt")).unwrap();
    assert_eq!(scheme1, scheme2, "same config + seed must be byte-identical");
    assert_eq!(incr1, incr2);

    // a different seed changes the draw
    run_ok(
        nsync()
            .args(["simulate", "--config"])
            .arg(&cfg)
            .args(["--seed", "99"])
            .output()
            .unwrap(),
    );
    let incr3 = std::fs::read(dir.path().join("out/increments.txt")).unwrap();
    assert_ne!(incr1, incr3);

    // restore and estimate from the dumps, with a covariance dump on the side
    run_ok(nsync().args(["simulate", "--config"]).arg(&cfg).output().unwrap());
    let cov_path = dir.path().join("out/covariance.txt");
    let stdout = run_ok(
        nsync()
            .args(["estimate", "--config"])
            .arg(&cfg)
            .arg("--dump-covariance")
            .arg(&cov_path)
            .output()
            .unwrap(),
    );
    assert!(stdout.contains("sigma_hat"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/report.json")).unwrap())
            .unwrap();
    assert!(report["report"]["sigma_hat"][0].as_f64().is_some());
    assert_eq!(report["constants_used"], serde_json::Value::Bool(true));

    // coordinate-list dump: "M1 M2 sigma" header then row col value lines
    let cov = std::fs::read_to_string(&cov_path).unwrap();
    let mut lines = cov.lines();
    let header: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
    let m1: usize = header[0].parse().unwrap();
    let m2: usize = header[1].parse().unwrap();
    assert!(header[2].parse::<f64>().is_ok());
    let body: Vec<&str> = lines.collect();
    assert!(body.len() >= m1 + m2, "diagonal entries present");
    for line in &body {
        let parts: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(parts.len(), 3);
        assert!(parts[2].parse::<f64>().is_ok());
    }
}

#[test]
fn corrupted_grid_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    write(&cfg, &base_config(&dir.path().join("out")));
    run_ok(nsync().args(["simulate", "--config"]).arg(&cfg).output().unwrap());

    // make grid1 non-monotone
    let scheme_path = dir.path().join("out/scheme.txt");
    let text = std::fs::read_to_string(&scheme_path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut grid1: Vec<&str> = lines[1].split_whitespace().collect();
    grid1.swap(1, 2);
    lines[1] = grid1.join(" ");
    write(&scheme_path, &(lines.join("\n") + "\n"));

    let out = nsync().args(["estimate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("strictly increasing"));
}

#[test]
fn estimate_without_constants_degrades_to_observed_information() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    write(
        &cfg,
        &base_config(&dir.path().join("out")).replace("constants = \"synchronous\"", "constants = \"none\""),
    );
    run_ok(nsync().args(["simulate", "--config"]).arg(&cfg).output().unwrap());
    run_ok(nsync().args(["estimate", "--config"]).arg(&cfg).output().unwrap());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/report.json")).unwrap())
            .unwrap();
    assert_eq!(report["constants_used"], serde_json::Value::Bool(false));
    assert!(report["report"]["plugin_cov_sigma"].is_null());
    assert!(!report["report"]["observed_cov_sigma"].is_null());
    assert!(!report["report"]["ci95_sigma"].is_null());
}

#[test]
fn mc_outputs_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    write(&cfg, &base_config(&dir.path().join("out")));

    run_ok(
        nsync()
            .args(["mc", "--config"])
            .arg(&cfg)
            .args(["--workers", "1"])
            .output()
            .unwrap(),
    );
    let rows1 = std::fs::read(dir.path().join("out/mc_rows.csv")).unwrap();
    let sum1: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/mc_summary.json")).unwrap(),
    )
    .unwrap();

    run_ok(
        nsync()
            .args(["mc", "--config"])
            .arg(&cfg)
            .args(["--workers", "2"])
            .output()
            .unwrap(),
    );
    let rows2 = std::fs::read(dir.path().join("out/mc_rows.csv")).unwrap();
    let mut sum2: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/mc_summary.json")).unwrap(),
    )
    .unwrap();

    assert_eq!(rows1, rows2, "CSV must not depend on the worker count");
    let mut sum1 = sum1;
    sum1["wall_clock_secs"] = 0.into();
    sum2["wall_clock_secs"] = 0.into();
    assert_eq!(sum1, sum2);
}

#[test]
fn mc_single_replication_yields_null_dispersion_and_warning() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    write(
        &cfg,
        &base_config(&dir.path().join("out")).replace("replications = 12", "replications = 1"),
    );
    run_ok(nsync().args(["mc", "--config"]).arg(&cfg).output().unwrap());
    let sum: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/mc_summary.json")).unwrap(),
    )
    .unwrap();
    assert!(sum["aggregates"]["sigma"][0]["sd_empirical"].is_null());
    let warnings = sum["warnings"].as_array().unwrap();
    assert!(warnings.iter().any(|w| w.as_str().unwrap().contains("single replication")
        || w.as_str().unwrap().contains("recommended minimum")));
}

#[test]
fn constants_file_roundtrip_feeds_estimation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    write(&cfg, &base_config(&dir.path().join("out")));
    run_ok(nsync().args(["constants", "--config"]).arg(&cfg).output().unwrap());
    let constants_path = dir.path().join("out/constants.json");
    assert!(constants_path.exists());
    // validate documented schema essentials
    let c: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&constants_path).unwrap()).unwrap();
    for key in ["a0", "a0_se", "a", "a_se", "f11", "f12", "f22", "replications"] {
        assert!(!c[key].is_null(), "constants.json missing {key}");
    }
    assert_eq!(
        c["a"].as_array().unwrap().len() + 1,
        c["f11"].as_array().unwrap().len()
    );

    // feed the file back through the constants policy
    let cfg2 = dir.path().join("exp2.toml");
    write(
        &cfg2,
        &base_config(&dir.path().join("out")).replace(
            "constants = \"synchronous\"",
            &format!("constants = \"{}\"", constants_path.display()),
        ),
    );
    run_ok(nsync().args(["simulate", "--config"]).arg(&cfg2).output().unwrap());
    run_ok(nsync().args(["estimate", "--config"]).arg(&cfg2).output().unwrap());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/report.json")).unwrap())
            .unwrap();
    assert_eq!(report["constants_used"], serde_json::Value::Bool(true));
}

#[test]
fn lan_zero_direction_is_exactly_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    write(&cfg, &base_config(&dir.path().join("out")));
    run_ok(nsync().args(["lan", "--config"]).arg(&cfg).output().unwrap());
    let lan: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/lan.json")).unwrap())
            .unwrap();
    assert_eq!(lan["summary"]["mean"].as_f64().unwrap(), 0.0);
    assert_eq!(lan["summary"]["variance"].as_f64().unwrap(), 0.0);
}
