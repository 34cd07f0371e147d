//! Experiment configuration: one TOML document with nested blocks for the
//! model, the sampling scheme, the run, the asymptotic constants, and the
//! optimizer.  Validation reports the offending field by name.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;
use nsync_core::asymptotics::p_max_policy;
use nsync_core::estimator::OptimizerConfig;
use nsync_core::model::{
    AffineDrift, CoefficientModel, DiffusionModulation, DriftModulation, ParamSpace, SigmaParam,
};
use nsync_core::sampling::{SchemeConstants, SchemeGenerator};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelBlock,
    pub sampling: SamplingBlock,
    #[serde(default)]
    pub run: RunBlock,
    #[serde(default)]
    pub asymptotics: AsymptoticsBlock,
    #[serde(default)]
    pub optimizer: OptimizerBlock,
    #[serde(default)]
    pub lan: Option<LanBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    /// "constant" or "periodic".
    pub family: String,
    /// "scale" | "correlation" | "scale_correlation".
    pub sigma_param: String,
    pub sigma_box: Vec<[f64; 2]>,
    pub theta_box: Vec<[f64; 2]>,
    #[serde(default)]
    pub sigma0: Option<Vec<f64>>,
    #[serde(default)]
    pub theta0: Option<Vec<f64>>,
    #[serde(default)]
    pub drift_base: Option<[f64; 2]>,
    pub drift_loadings: Vec<[f64; 2]>,
    #[serde(default)]
    pub period: Option<f64>,
    #[serde(default)]
    pub diffusion_amp: Option<f64>,
    #[serde(default)]
    pub drift_mod_a: Option<f64>,
    #[serde(default)]
    pub drift_mod_b: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingBlock {
    /// "poisson" or "equidistant".
    pub generator: String,
    #[serde(default)]
    pub lambda1: Option<f64>,
    #[serde(default)]
    pub lambda2: Option<f64>,
    #[serde(default)]
    pub offset2: Option<f64>,
    pub n: usize,
    #[serde(default)]
    pub h_n: Option<f64>,
    /// Rate exponent gamma with h_n = n^{-gamma}; exclusive with `h_n`.
    #[serde(default)]
    pub gamma_exponent: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_seed")]
    pub base_seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_replications() -> usize {
    100
}

fn default_seed() -> u64 {
    1
}

fn default_workers() -> usize {
    1
}

impl Default for RunBlock {
    fn default() -> Self {
        RunBlock {
            replications: default_replications(),
            base_seed: default_seed(),
            workers: default_workers(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AsymptoticsBlock {
    /// Series truncation; defaults to the tail policy at the model's rho_max.
    #[serde(default)]
    pub p_max: Option<usize>,
    /// Averaging horizon for models without constant/periodic structure.
    #[serde(default)]
    pub t_avg: Option<f64>,
    /// "estimate" (default), "synchronous", "none", or a path to a
    /// constants JSON file.
    #[serde(default)]
    pub constants: Option<String>,
    #[serde(default)]
    pub constants_replications: Option<usize>,
    #[serde(default)]
    pub constants_n: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerBlock {
    #[serde(default = "default_multistart")]
    pub multistart: usize,
    #[serde(default = "default_x_tol")]
    pub x_tol: f64,
    #[serde(default = "default_f_tol")]
    pub f_tol: f64,
    #[serde(default = "default_max_evals")]
    pub max_evals: usize,
}

fn default_multistart() -> usize {
    3
}
fn default_x_tol() -> f64 {
    1e-8
}
fn default_f_tol() -> f64 {
    1e-10
}
fn default_max_evals() -> usize {
    2000
}

impl Default for OptimizerBlock {
    fn default() -> Self {
        OptimizerBlock {
            multistart: default_multistart(),
            x_tol: default_x_tol(),
            f_tol: default_f_tol(),
            max_evals: default_max_evals(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LanBlock {
    /// Local direction u in R^{d1 + d2}.
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            dir: default_out_dir(),
        }
    }
}

/// How the scheme constants for plug-in variances are obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstantsPolicy {
    EstimateFirst,
    Synchronous,
    None,
    File(PathBuf),
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    pub fn from_str(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.sampling.n < 10 {
            return Err(CliError::config(format!(
                "sampling.n = {} must be at least 10",
                self.sampling.n
            )));
        }
        match (self.sampling.h_n, self.sampling.gamma_exponent) {
            (Some(h), None) if h > 0.0 => {}
            (None, Some(g)) if g > 0.0 && g < 1.0 => {}
            // neither given: the default rate h_n = n^{-1/2} applies
            (None, None) => {}
            (Some(_), Some(_)) => {
                return Err(CliError::config(
                    "sampling.h_n and sampling.gamma_exponent are mutually exclusive",
                ))
            }
            (Some(h), None) => {
                return Err(CliError::config(format!(
                    "sampling.h_n = {h} must be positive"
                )))
            }
            (None, Some(g)) => {
                return Err(CliError::config(format!(
                    "sampling.gamma_exponent = {g} must lie in (0, 1) so that h_n -> 0 and T_n -> infinity"
                )))
            }
        }
        match self.sampling.generator.as_str() {
            "poisson" => {
                for (name, v) in [
                    ("sampling.lambda1", self.sampling.lambda1),
                    ("sampling.lambda2", self.sampling.lambda2),
                ] {
                    match v {
                        Some(x) if x > 0.0 => {}
                        Some(x) => {
                            return Err(CliError::config(format!("{name} = {x} must be positive")))
                        }
                        None => {
                            return Err(CliError::config(format!(
                                "{name} is required for the poisson generator"
                            )))
                        }
                    }
                }
            }
            "equidistant" => {
                if let Some(o) = self.sampling.offset2 {
                    if !(0.0..1.0).contains(&o) {
                        return Err(CliError::config(format!(
                            "sampling.offset2 = {o} must lie in [0, 1)"
                        )));
                    }
                }
            }
            other => {
                return Err(CliError::config(format!(
                    "sampling.generator = {other:?} (expected \"poisson\" or \"equidistant\")"
                )))
            }
        }
        if self.run.workers == 0 {
            return Err(CliError::config("run.workers must be at least 1"));
        }
        self.constants_policy()?;
        Ok(())
    }

    pub fn h_n(&self) -> f64 {
        match (self.sampling.h_n, self.sampling.gamma_exponent) {
            (Some(h), _) => h,
            (None, Some(g)) => (self.sampling.n as f64).powf(-g),
            // default rate exponent 0.5: h_n -> 0 and T_n = sqrt(n) -> infinity
            (None, None) => (self.sampling.n as f64).powf(-0.5),
        }
    }

    pub fn generator(&self) -> Result<SchemeGenerator, CliError> {
        Ok(match self.sampling.generator.as_str() {
            "poisson" => SchemeGenerator::Poisson {
                lambda1: self.sampling.lambda1.unwrap(),
                lambda2: self.sampling.lambda2.unwrap(),
            },
            "equidistant" => SchemeGenerator::Equidistant {
                offset2: self.sampling.offset2.unwrap_or(0.0),
            },
            _ => unreachable!("validated"),
        })
    }

    pub fn build_model(&self) -> Result<CoefficientModel, CliError> {
        let m = &self.model;
        let sigma_param = match m.sigma_param.as_str() {
            "scale" => SigmaParam::Scale,
            "correlation" => SigmaParam::Correlation,
            "scale_correlation" => SigmaParam::ScaleCorrelation,
            other => {
                return Err(CliError::config(format!(
                    "model.sigma_param = {other:?} (expected \"scale\", \"correlation\" or \"scale_correlation\")"
                )))
            }
        };
        let params = ParamSpace::new(
            m.sigma_box.iter().map(|b| (b[0], b[1])).collect(),
            m.theta_box.iter().map(|b| (b[0], b[1])).collect(),
            m.sigma0.clone(),
            m.theta0.clone(),
        )
        .map_err(|e| CliError::config(format!("model boxes/true values: {e}")))?;
        let drift = AffineDrift {
            base: m.drift_base.unwrap_or([0.0, 0.0]),
            loadings: m.drift_loadings.clone(),
        };
        let model = match m.family.as_str() {
            "constant" => CoefficientModel::constant(sigma_param, drift, params),
            "periodic" => {
                let period = m.period.ok_or_else(|| {
                    CliError::config("model.period is required for the periodic family")
                })?;
                let dmod = m
                    .diffusion_amp
                    .map(|amp| DiffusionModulation { amp, period });
                let drmod = match (m.drift_mod_a, m.drift_mod_b) {
                    (None, None) => None,
                    (a, b) => Some(DriftModulation {
                        a: a.unwrap_or(0.0),
                        b: b.unwrap_or(0.0),
                        period,
                    }),
                };
                CoefficientModel::periodic(sigma_param, drift, dmod, drmod, params)
            }
            other => {
                return Err(CliError::config(format!(
                    "model.family = {other:?} (expected \"constant\" or \"periodic\")"
                )))
            }
        }
        .map_err(|e| CliError::config(format!("model: {e}")))?;
        model
            .validate_ellipticity(200, 0xE11)
            .map_err(|e| CliError::config(format!("model ellipticity audit: {e}")))?;
        Ok(model)
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            multistart: self.optimizer.multistart,
            x_tol: self.optimizer.x_tol,
            f_tol: self.optimizer.f_tol,
            max_evals: self.optimizer.max_evals,
        }
    }

    pub fn p_max(&self, model: &CoefficientModel) -> usize {
        self.asymptotics
            .p_max
            .unwrap_or_else(|| p_max_policy(model.rho_max()))
    }

    pub fn constants_policy(&self) -> Result<ConstantsPolicy, CliError> {
        Ok(match self.asymptotics.constants.as_deref() {
            None | Some("estimate") => ConstantsPolicy::EstimateFirst,
            Some("synchronous") => ConstantsPolicy::Synchronous,
            Some("none") => ConstantsPolicy::None,
            Some(path) => {
                if path.is_empty() {
                    return Err(CliError::config("asymptotics.constants must not be empty"));
                }
                ConstantsPolicy::File(PathBuf::from(path))
            }
        })
    }

    /// True values are mandatory for simulation-driven commands.
    pub fn require_true_values(&self) -> Result<(), CliError> {
        if self.model.sigma0.is_none() {
            return Err(CliError::config(
                "model.sigma0 is required for simulation commands",
            ));
        }
        if self.model.theta0.is_none() {
            return Err(CliError::config(
                "model.theta0 is required for simulation commands",
            ));
        }
        Ok(())
    }

    /// Stable fingerprint of the configuration document (FNV-1a over the
    /// canonical serialization).  Worker count and output directory are
    /// normalized out: they must not affect any numeric output.
    pub fn fingerprint(&self) -> String {
        let mut canon_cfg = self.clone();
        canon_cfg.run.workers = 1;
        canon_cfg.output.dir = PathBuf::new();
        let canon = toml::to_string(&canon_cfg).unwrap_or_default();
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for b in canon.as_bytes() {
            hash ^= *b as u64;
            hash = hash.wrapping_mul(0x1000_0000_01b3);
        }
        format!("{hash:016x}")
    }

    /// Load or estimate the scheme constants per the configured policy;
    /// `None` when the policy disables plug-in variances.
    pub fn resolve_constants(
        &self,
        model: &CoefficientModel,
    ) -> Result<Option<SchemeConstants>, CliError> {
        let p_max = self.p_max(model);
        match self.constants_policy()? {
            ConstantsPolicy::None => Ok(None),
            ConstantsPolicy::Synchronous => Ok(Some(SchemeConstants::synchronous(p_max))),
            ConstantsPolicy::File(path) => {
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    CliError::data(format!("cannot read constants {}: {e}", path.display()))
                })?;
                let c: SchemeConstants = serde_json::from_str(&text)
                    .map_err(|e| CliError::data(format!("constants JSON: {e}")))?;
                c.validate()
                    .map_err(|e| CliError::data(format!("constants invalid: {e}")))?;
                Ok(Some(c))
            }
            ConstantsPolicy::EstimateFirst => {
                let n = self
                    .asymptotics
                    .constants_n
                    .unwrap_or_else(|| self.sampling.n.min(500))
                    .max(50);
                let reps = self.asymptotics.constants_replications.unwrap_or(100).max(2);
                let h_n = match self.sampling.gamma_exponent {
                    Some(g) => (n as f64).powf(-g),
                    None => self.h_n(),
                };
                let t_n = n as f64 * h_n;
                let windows = nsync_core::sampling::WindowPartition::unit(t_n);
                let constants = nsync_core::sampling::estimate_constants(
                    &self.generator()?,
                    reps,
                    p_max,
                    n,
                    h_n,
                    &windows,
                    self.run.base_seed ^ 0x5EED_C057,
                )?;
                Ok(Some(constants))
            }
        }
    }
}
