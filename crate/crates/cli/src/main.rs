//! `nsync`: experiment CLI for quasi-likelihood estimation of
//! nonsynchronously observed two-dimensional diffusions.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 run-level
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nsync_cli::config::ExperimentConfig;
use nsync_cli::runner::{self, Overrides};
use nsync_cli::CliError;

#[derive(Parser)]
#[command(
    name = "nsync",
    about = "Quasi-likelihood estimation for nonsynchronously observed diffusions",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override run.base_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override run.workers.
    #[arg(long)]
    workers: Option<usize>,
    /// Override output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one scheme and one increment vector and dump them as text.
    Simulate(Common),
    /// Estimate from dumped scheme/increment files.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Scheme dump (defaults to <out>/scheme.txt).
        #[arg(long)]
        scheme: Option<PathBuf>,
        /// Increment dump (defaults to <out>/increments.txt).
        #[arg(long)]
        increments: Option<PathBuf>,
        /// Dump the assembled covariance at sigma_hat in coordinate-list form.
        #[arg(long)]
        dump_covariance: Option<PathBuf>,
    },
    /// Monte Carlo study of the estimator's asymptotic law.
    Mc(Common),
    /// Estimate the sampling-scheme limit constants.
    Constants(Common),
    /// Local likelihood-ratio experiment.
    Lan(Common),
}

fn load(common: &Common) -> Result<(ExperimentConfig, Overrides), CliError> {
    let cfg = ExperimentConfig::from_path(&common.config)?;
    Ok((
        cfg,
        Overrides {
            seed: common.seed,
            workers: common.workers,
            out: common.out.clone(),
        },
    ))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(common) => {
            let (cfg, ov) = load(&common)?;
            let out = runner::cmd_simulate(cfg, &ov)?;
            println!(
                "wrote {} and {} (M1 = {}, M2 = {}, r_n = {:.6})",
                out.scheme_path.display(),
                out.increments_path.display(),
                out.m1,
                out.m2,
                out.r_n
            );
        }
        Command::Estimate {
            common,
            scheme,
            increments,
            dump_covariance,
        } => {
            let (cfg, ov) = load(&common)?;
            let dir = ov.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
            let scheme_path = scheme.unwrap_or_else(|| dir.join("scheme.txt"));
            let increments_path = increments.unwrap_or_else(|| dir.join("increments.txt"));
            let out = runner::cmd_estimate(
                cfg,
                &ov,
                &scheme_path,
                &increments_path,
                dump_covariance.as_deref(),
            )?;
            println!(
                "sigma_hat = {:?}, theta_hat = {:?} (report.json written)",
                out.report.sigma_hat, out.report.theta_hat
            );
        }
        Command::Mc(common) => {
            let (cfg, ov) = load(&common)?;
            let summary = runner::cmd_mc(cfg, &ov)?;
            println!(
                "{} replications ({} failed, {} boundary) in {:.1}s; mc_summary.json written",
                summary.replications,
                summary.failed,
                summary.boundary_hits,
                summary.wall_clock_secs
            );
            for c in summary
                .aggregates
                .sigma
                .iter()
                .chain(summary.aggregates.theta.iter())
            {
                println!(
                    "  {}: bias {:+.5}, sd {:.5} vs theory {:.5} (ratio {:.3}), coverage {:.3}, KS {:.3}",
                    c.name,
                    c.bias,
                    c.sd_empirical.unwrap_or(f64::NAN),
                    c.sd_theoretical.unwrap_or(f64::NAN),
                    c.sd_ratio.unwrap_or(f64::NAN),
                    c.coverage95.unwrap_or(f64::NAN),
                    c.ks_distance.unwrap_or(f64::NAN),
                );
            }
        }
        Command::Constants(common) => {
            let (cfg, ov) = load(&common)?;
            let out = runner::cmd_constants(cfg, &ov)?;
            println!(
                "a0 = [{:.4}, {:.4}], a_1 = {:.4} (se {:.4}); constants.json written",
                out.constants.a0[0], out.constants.a0[1], out.constants.a[0], out.constants.a_se[0]
            );
        }
        Command::Lan(common) => {
            let (cfg, ov) = load(&common)?;
            let out = runner::cmd_lan(cfg, &ov)?;
            println!(
                "log-ratio mean {:.4} (ref {:.4}), variance {:.4} (ref {:.4}); lan.json written",
                out.summary.mean,
                out.summary.reference_mean,
                out.summary.variance,
                out.summary.reference_variance
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
