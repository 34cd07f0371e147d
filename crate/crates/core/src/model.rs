//! Parametric deterministic coefficients of the two-dimensional SDE
//! dX_t = mu_t(theta) dt + b_t(sigma) dW_t, together with the pointwise and
//! integrated quantities every other module consumes.
//!
//! Built-in families cover constant coefficients (scale / correlation /
//! scale+correlation diffusions, affine drift) and sinusoidally modulated
//! periodic variants; anything else can be supplied through the
//! [`Coefficients`] trait.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::rng::rng_from_seed;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

/// Finite-difference step for parameter derivatives of model quantities.
pub(crate) fn fd_step(x: f64) -> f64 {
    1e-5 * (1.0 + x.abs())
}

// ---------------------------------------------------------------------------
// Parameter space
// ---------------------------------------------------------------------------

/// Boxes for the diffusion parameter sigma (dimension d1) and the drift
/// parameter theta (dimension d2), with optional true values for simulation
/// studies.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamSpace {
    sigma_box: Vec<(f64, f64)>,
    theta_box: Vec<(f64, f64)>,
    sigma0: Option<Vec<f64>>,
    theta0: Option<Vec<f64>>,
}

impl ParamSpace {
    pub fn new(
        sigma_box: Vec<(f64, f64)>,
        theta_box: Vec<(f64, f64)>,
        sigma0: Option<Vec<f64>>,
        theta0: Option<Vec<f64>>,
    ) -> Result<Self> {
        for (name, b) in [("sigma", &sigma_box), ("theta", &theta_box)] {
            for (k, &(lo, hi)) in b.iter().enumerate() {
                if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                    return Err(CoreError::InvalidParamSpace(format!(
                        "{name} box coordinate {k} has bounds ({lo}, {hi})"
                    )));
                }
            }
        }
        let check_true = |name: &str, v: &Option<Vec<f64>>, b: &[(f64, f64)]| -> Result<()> {
            if let Some(v) = v {
                if v.len() != b.len() {
                    return Err(CoreError::InvalidParamSpace(format!(
                        "true {name} has dimension {}, box has {}",
                        v.len(),
                        b.len()
                    )));
                }
                for (k, (&x, &(lo, hi))) in v.iter().zip(b.iter()).enumerate() {
                    if !(x > lo && x < hi) {
                        return Err(CoreError::InvalidParamSpace(format!(
                            "true {name}[{k}] = {x} not strictly inside ({lo}, {hi})"
                        )));
                    }
                }
            }
            Ok(())
        };
        check_true("sigma", &sigma0, &sigma_box)?;
        check_true("theta", &theta0, &theta_box)?;
        Ok(ParamSpace {
            sigma_box,
            theta_box,
            sigma0,
            theta0,
        })
    }

    pub fn d1(&self) -> usize {
        self.sigma_box.len()
    }

    pub fn d2(&self) -> usize {
        self.theta_box.len()
    }

    pub fn sigma_box(&self) -> &[(f64, f64)] {
        &self.sigma_box
    }

    pub fn theta_box(&self) -> &[(f64, f64)] {
        &self.theta_box
    }

    pub fn sigma0(&self) -> Result<&[f64]> {
        self.sigma0.as_deref().ok_or(CoreError::TrueValuesRequired)
    }

    pub fn theta0(&self) -> Result<&[f64]> {
        self.theta0.as_deref().ok_or(CoreError::TrueValuesRequired)
    }

    pub fn has_true_values(&self) -> bool {
        self.sigma0.is_some() && self.theta0.is_some()
    }

    /// Checks membership in the closed box clos(Theta_1).
    pub fn check_sigma(&self, sigma: &[f64]) -> Result<()> {
        check_box("sigma", &self.sigma_box, sigma)
    }

    pub fn check_theta(&self, theta: &[f64]) -> Result<()> {
        check_box("theta", &self.theta_box, theta)
    }
}

fn check_box(which: &'static str, b: &[(f64, f64)], x: &[f64]) -> Result<()> {
    if x.len() != b.len() {
        return Err(CoreError::ParamDimension {
            which,
            expected: b.len(),
            got: x.len(),
        });
    }
    for (k, (&v, &(lo, hi))) in x.iter().zip(b.iter()).enumerate() {
        if !(v >= lo && v <= hi) {
            return Err(CoreError::ParamOutOfBox {
                which,
                index: k,
                value: v,
            });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Coefficient evaluators
// ---------------------------------------------------------------------------

/// Time structure of the coefficients; drives quadrature bypasses and the
/// time-averaging policy for the limit functionals.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum TimeStructure {
    Constant,
    Periodic { period: f64 },
    General,
}

/// Raw drift/diffusion evaluators.  Implementations must be pure functions of
/// their arguments.
pub trait Coefficients: Send + Sync {
    /// mu_t(theta), a 2-vector.
    fn drift(&self, t: f64, theta: &[f64]) -> [f64; 2];
    /// b_t(sigma), a 2x2 matrix (rows x columns).
    fn diffusion(&self, t: f64, sigma: &[f64]) -> [[f64; 2]; 2];
}

/// Diffusion parametrizations of the built-in families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SigmaParam {
    /// Sigma_t = s^2 I, sigma = (s), d1 = 1.
    Scale,
    /// Sigma_t = [[1, rho], [rho, 1]], sigma = (rho), d1 = 1.
    Correlation,
    /// Sigma_t = s^2 [[1, rho], [rho, 1]], sigma = (s, rho), d1 = 2.
    ScaleCorrelation,
}

impl SigmaParam {
    pub fn d1(&self) -> usize {
        match self {
            SigmaParam::Scale | SigmaParam::Correlation => 1,
            SigmaParam::ScaleCorrelation => 2,
        }
    }
}

/// Affine drift mu(theta) = base + sum_k theta_k * loadings[k]; d2 equals the
/// number of loadings.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AffineDrift {
    pub base: [f64; 2],
    pub loadings: Vec<[f64; 2]>,
}

impl AffineDrift {
    /// mu = (theta, theta): one common drift slope on both coordinates.
    pub fn common() -> Self {
        AffineDrift {
            base: [0.0, 0.0],
            loadings: vec![[1.0, 1.0]],
        }
    }

    /// mu = (theta_1, theta_2).
    pub fn per_coordinate() -> Self {
        AffineDrift {
            base: [0.0, 0.0],
            loadings: vec![[1.0, 0.0], [0.0, 1.0]],
        }
    }

    fn eval(&self, theta: &[f64]) -> [f64; 2] {
        let mut out = self.base;
        for (k, load) in self.loadings.iter().enumerate() {
            out[0] += theta[k] * load[0];
            out[1] += theta[k] * load[1];
        }
        out
    }
}

/// Multiplicative modulation of the diffusion matrix Sigma_t:
/// Sigma_t = (1 + amp sin(2 pi t / period)) Sigma_base.  Requires |amp| < 1.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiffusionModulation {
    pub amp: f64,
    pub period: f64,
}

/// Multiplicative modulation of the drift: mu_t = (a + b cos(2 pi t / period)) mu_base.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DriftModulation {
    pub a: f64,
    pub b: f64,
    pub period: f64,
}

struct BuiltinCoefficients {
    sigma_param: SigmaParam,
    drift: AffineDrift,
    diffusion_mod: Option<DiffusionModulation>,
    drift_mod: Option<DriftModulation>,
}

impl BuiltinCoefficients {
    fn base_diffusion(&self, sigma: &[f64]) -> [[f64; 2]; 2] {
        match self.sigma_param {
            SigmaParam::Scale => {
                let s = sigma[0];
                [[s, 0.0], [0.0, s]]
            }
            SigmaParam::Correlation => {
                let r = sigma[0];
                [[1.0, 0.0], [r, (1.0 - r * r).sqrt()]]
            }
            SigmaParam::ScaleCorrelation => {
                let (s, r) = (sigma[0], sigma[1]);
                [[s, 0.0], [s * r, s * (1.0 - r * r).sqrt()]]
            }
        }
    }
}

impl Coefficients for BuiltinCoefficients {
    fn drift(&self, t: f64, theta: &[f64]) -> [f64; 2] {
        let mut mu = self.drift.eval(theta);
        if let Some(m) = &self.drift_mod {
            let c = m.a + m.b * (2.0 * core::f64::consts::PI * t / m.period).cos();
            mu[0] *= c;
            mu[1] *= c;
        }
        mu
    }

    fn diffusion(&self, t: f64, sigma: &[f64]) -> [[f64; 2]; 2] {
        let mut b = self.base_diffusion(sigma);
        if let Some(m) = &self.diffusion_mod {
            let c = (1.0 + m.amp * (2.0 * core::f64::consts::PI * t / m.period).sin()).sqrt();
            for row in &mut b {
                row[0] *= c;
                row[1] *= c;
            }
        }
        b
    }
}

// ---------------------------------------------------------------------------
// CoefficientModel
// ---------------------------------------------------------------------------

/// Component selector for integrated diffusion entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaComponent {
    C11,
    C22,
    C12,
}

/// A validated coefficient model: evaluators plus the declared ellipticity
/// bounds and correlation cap of Assumption-style modeling contracts.
/// Immutable after construction; all operations are pure.
pub struct CoefficientModel {
    coeffs: Box<dyn Coefficients>,
    time_structure: TimeStructure,
    drift_linear_in_theta: bool,
    c1: f64,
    c2: f64,
    rho_max: f64,
    params: ParamSpace,
}

impl CoefficientModel {
    /// Constant-coefficient family.
    pub fn constant(
        sigma_param: SigmaParam,
        drift: AffineDrift,
        params: ParamSpace,
    ) -> Result<Self> {
        Self::builtin(sigma_param, drift, None, None, params)
    }

    /// Periodic family: both coefficient modulations share the stated periods.
    pub fn periodic(
        sigma_param: SigmaParam,
        drift: AffineDrift,
        diffusion_mod: Option<DiffusionModulation>,
        drift_mod: Option<DriftModulation>,
        params: ParamSpace,
    ) -> Result<Self> {
        if diffusion_mod.is_none() && drift_mod.is_none() {
            return Err(CoreError::InvalidModel(
                "periodic family needs at least one modulation".into(),
            ));
        }
        Self::builtin(sigma_param, drift, diffusion_mod, drift_mod, params)
    }

    fn builtin(
        sigma_param: SigmaParam,
        drift: AffineDrift,
        diffusion_mod: Option<DiffusionModulation>,
        drift_mod: Option<DriftModulation>,
        params: ParamSpace,
    ) -> Result<Self> {
        if params.d1() != sigma_param.d1() {
            return Err(CoreError::InvalidModel(format!(
                "sigma box dimension {} does not match family dimension {}",
                params.d1(),
                sigma_param.d1()
            )));
        }
        if params.d2() != drift.loadings.len() {
            return Err(CoreError::InvalidModel(format!(
                "theta box dimension {} does not match {} drift loadings",
                params.d2(),
                drift.loadings.len()
            )));
        }
        if let Some(m) = &diffusion_mod {
            if !(m.amp.abs() < 1.0) || !(m.period > 0.0) {
                return Err(CoreError::InvalidModel(
                    "diffusion modulation needs |amp| < 1 and period > 0".into(),
                ));
            }
        }
        if let Some(m) = &drift_mod {
            if !(m.period > 0.0) {
                return Err(CoreError::InvalidModel("drift modulation period must be positive".into()));
            }
        }
        let (mut c1, mut c2, rho_max) = builtin_bounds(sigma_param, params.sigma_box())?;
        if let Some(m) = &diffusion_mod {
            c1 *= 1.0 - m.amp.abs();
            c2 *= 1.0 + m.amp.abs();
        }
        if !(c1 > 0.0) {
            return Err(CoreError::InvalidModel(format!(
                "ellipticity lower bound c1 = {c1} must be positive"
            )));
        }
        let time_structure = match (&diffusion_mod, &drift_mod) {
            (None, None) => TimeStructure::Constant,
            (Some(m), _) => TimeStructure::Periodic { period: m.period },
            (None, Some(m)) => TimeStructure::Periodic { period: m.period },
        };
        Ok(CoefficientModel {
            coeffs: Box::new(BuiltinCoefficients {
                sigma_param,
                drift,
                diffusion_mod,
                drift_mod,
            }),
            time_structure,
            drift_linear_in_theta: true,
            c1,
            c2,
            rho_max,
            params,
        })
    }

    /// User-supplied evaluators with declared bounds.
    pub fn custom(
        coeffs: Box<dyn Coefficients>,
        time_structure: TimeStructure,
        drift_linear_in_theta: bool,
        c1: f64,
        c2: f64,
        rho_max: f64,
        params: ParamSpace,
    ) -> Result<Self> {
        if !(c1 > 0.0 && c2 >= c1) {
            return Err(CoreError::InvalidModel(format!(
                "need 0 < c1 <= c2, got c1 = {c1}, c2 = {c2}"
            )));
        }
        if !((0.0..1.0).contains(&rho_max)) {
            return Err(CoreError::InvalidModel(format!(
                "rho_max = {rho_max} must lie in [0, 1)"
            )));
        }
        Ok(CoefficientModel {
            coeffs,
            time_structure,
            drift_linear_in_theta,
            c1,
            c2,
            rho_max,
            params,
        })
    }

    pub fn params(&self) -> &ParamSpace {
        &self.params
    }

    pub fn time_structure(&self) -> TimeStructure {
        self.time_structure
    }

    pub fn drift_linear_in_theta(&self) -> bool {
        self.drift_linear_in_theta
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }

    pub fn drift_at(&self, t: f64, theta: &[f64]) -> Result<[f64; 2]> {
        self.params.check_theta(theta)?;
        Ok(self.coeffs.drift(t, theta))
    }

    /// Sigma_t(sigma) = b_t b_t^T(sigma).
    pub fn sigma_matrix(&self, t: f64, sigma: &[f64]) -> Result<[[f64; 2]; 2]> {
        self.params.check_sigma(sigma)?;
        Ok(self.sigma_matrix_unchecked(t, sigma))
    }

    fn sigma_matrix_unchecked(&self, t: f64, sigma: &[f64]) -> [[f64; 2]; 2] {
        let b = self.coeffs.diffusion(t, sigma);
        let s11 = b[0][0] * b[0][0] + b[0][1] * b[0][1];
        let s22 = b[1][0] * b[1][0] + b[1][1] * b[1][1];
        let s12 = b[0][0] * b[1][0] + b[0][1] * b[1][1];
        [[s11, s12], [s12, s22]]
    }

    /// rho_t(sigma) = [Sigma]_12 / sqrt([Sigma]_11 [Sigma]_22).
    pub fn local_correlation(&self, t: f64, sigma: &[f64]) -> Result<f64> {
        let s = self.sigma_matrix(t, sigma)?;
        let (d1, d2) = (s[0][0], s[1][1]);
        if !(d1 > 0.0 && d2 > 0.0) {
            return Err(CoreError::InvalidModel(format!(
                "degenerate diagonal in Sigma_t at t = {t}: ({d1}, {d2})"
            )));
        }
        Ok(s[0][1] / (d1.sqrt() * d2.sqrt()))
    }

    /// Integral of a Sigma component over (a, b].
    pub fn integrate_sigma(
        &self,
        a: f64,
        b: f64,
        sigma: &[f64],
        comp: SigmaComponent,
    ) -> Result<f64> {
        self.params.check_sigma(sigma)?;
        debug_assert!(a <= b);
        if let TimeStructure::Constant = self.time_structure {
            let s = self.sigma_matrix_unchecked(0.0, sigma);
            return Ok(component(&s, comp) * (b - a));
        }
        integrate(a, b, |t| component(&self.sigma_matrix_unchecked(t, sigma), comp))
    }

    /// Integral of the l-th drift coordinate over (a, b] (the Delta V entry).
    pub fn increment_drift(&self, a: f64, b: f64, theta: &[f64], l: usize) -> Result<f64> {
        self.params.check_theta(theta)?;
        debug_assert!(matches!(l, 1 | 2));
        debug_assert!(a <= b);
        if let TimeStructure::Constant = self.time_structure {
            return Ok(self.coeffs.drift(0.0, theta)[l - 1] * (b - a));
        }
        integrate(a, b, |t| self.coeffs.drift(t, theta)[l - 1])
    }

    /// Normalized drift deviation phi_{l,t}(theta) relative to the true values.
    pub fn phi(&self, t: f64, theta: &[f64], l: usize) -> Result<f64> {
        let sigma0 = self.params.sigma0()?.to_vec();
        let theta0 = self.params.theta0()?.to_vec();
        self.params.check_theta(theta)?;
        let s0 = self.sigma_matrix_unchecked(t, &sigma0);
        let d = [s0[0][0], s0[1][1]][l - 1];
        let mu = self.coeffs.drift(t, theta)[l - 1];
        let mu0 = self.coeffs.drift(t, &theta0)[l - 1];
        if mu == mu0 {
            return Ok(0.0);
        }
        Ok((mu - mu0) / d.sqrt())
    }

    /// Standard-deviation ratio B_{l,t}(sigma; sigma_ref)
    /// = ([Sigma_t(sigma_ref)]_ll / [Sigma_t(sigma)]_ll)^{1/2}.
    pub fn sd_ratio(&self, t: f64, sigma: &[f64], sigma_ref: &[f64], l: usize) -> Result<f64> {
        self.params.check_sigma(sigma)?;
        self.params.check_sigma(sigma_ref)?;
        let s = self.sigma_matrix_unchecked(t, sigma);
        let s0 = self.sigma_matrix_unchecked(t, sigma_ref);
        let idx = l - 1;
        Ok((s0[idx][idx] / s[idx][idx]).sqrt())
    }

    /// Central finite-difference gradient in sigma of the local correlation,
    /// evaluated at `sigma_ref`.
    pub fn d_sigma_local_correlation(&self, t: f64, sigma_ref: &[f64]) -> Result<Vec<f64>> {
        fd_gradient_clamped(self.params.sigma_box(), sigma_ref, |s| {
            self.local_correlation(t, s)
        })
    }

    /// Central finite-difference gradient in sigma of B_{l,t}(sigma; sigma_ref)
    /// at sigma = sigma_ref.
    pub fn d_sigma_sd_ratio(&self, t: f64, sigma_ref: &[f64], l: usize) -> Result<Vec<f64>> {
        fd_gradient_clamped(self.params.sigma_box(), sigma_ref, |s| {
            self.sd_ratio(t, s, sigma_ref, l)
        })
    }

    /// Central finite-difference gradient in theta of phi_{l,t} at `theta_ref`.
    pub fn d_theta_phi(&self, t: f64, theta_ref: &[f64], l: usize) -> Result<Vec<f64>> {
        fd_gradient_clamped(self.params.theta_box(), theta_ref, |th| self.phi(t, th, l))
    }

    /// Randomized audit of the declared ellipticity bounds and correlation
    /// cap: Sigma_t(sigma) symmetric with eigenvalues in [c1, c2] and
    /// |rho_t(sigma)| <= rho_max over `probes` random (t, sigma) pairs.
    pub fn validate_ellipticity(&self, probes: usize, seed: u64) -> Result<()> {
        let mut rng = rng_from_seed(seed);
        let horizon = match self.time_structure {
            TimeStructure::Periodic { period } => period,
            _ => 100.0,
        };
        let tol = 1e-9 * self.c2.max(1.0);
        for _ in 0..probes {
            let t = rng.gen_range(0.0..horizon);
            let sigma: Vec<f64> = self
                .params
                .sigma_box()
                .iter()
                .map(|&(lo, hi)| rng.gen_range(lo..=hi))
                .collect();
            let s = self.sigma_matrix_unchecked(t, &sigma);
            let mean = 0.5 * (s[0][0] + s[1][1]);
            let radius = (0.25 * (s[0][0] - s[1][1]).powi(2) + s[0][1] * s[0][1]).sqrt();
            let (lo, hi) = (mean - radius, mean + radius);
            if lo < self.c1 - tol || hi > self.c2 + tol {
                return Err(CoreError::InvalidModel(format!(
                    "eigenvalue range [{lo}, {hi}] escapes declared [c1, c2] = [{}, {}] at t = {t}",
                    self.c1, self.c2
                )));
            }
            let rho = s[0][1] / (s[0][0].sqrt() * s[1][1].sqrt());
            if rho.abs() > self.rho_max + 1e-12 {
                return Err(CoreError::InvalidModel(format!(
                    "|rho_t| = {} exceeds declared cap {} at t = {t}",
                    rho.abs(),
                    self.rho_max
                )));
            }
        }
        Ok(())
    }
}

fn component(s: &[[f64; 2]; 2], comp: SigmaComponent) -> f64 {
    match comp {
        SigmaComponent::C11 => s[0][0],
        SigmaComponent::C22 => s[1][1],
        SigmaComponent::C12 => s[0][1],
    }
}

fn builtin_bounds(sigma_param: SigmaParam, sigma_box: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    let bad = |msg: String| Err(CoreError::InvalidModel(msg));
    match sigma_param {
        SigmaParam::Scale => {
            let (lo, hi) = sigma_box[0];
            if lo <= 0.0 {
                return bad(format!("scale box lower bound {lo} must be positive"));
            }
            Ok((lo * lo, hi * hi, 0.0))
        }
        SigmaParam::Correlation => {
            let (lo, hi) = sigma_box[0];
            let rmax = lo.abs().max(hi.abs());
            if rmax >= 1.0 {
                return bad(format!("correlation box [{lo}, {hi}] must stay inside (-1, 1)"));
            }
            Ok((1.0 - rmax, 1.0 + rmax, rmax))
        }
        SigmaParam::ScaleCorrelation => {
            let (slo, shi) = sigma_box[0];
            let (rlo, rhi) = sigma_box[1];
            if slo <= 0.0 {
                return bad(format!("scale box lower bound {slo} must be positive"));
            }
            let rmax = rlo.abs().max(rhi.abs());
            if rmax >= 1.0 {
                return bad(format!("correlation box [{rlo}, {rhi}] must stay inside (-1, 1)"));
            }
            Ok((slo * slo * (1.0 - rmax), shi * shi * (1.0 + rmax), rmax))
        }
    }
}

/// Central finite differences with probe points clamped into the box; near an
/// edge the difference degrades gracefully to a one-sided quotient over the
/// actual probe spread.
fn fd_gradient_clamped<F>(boxes: &[(f64, f64)], x: &[f64], f: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for k in 0..x.len() {
        let (lo, hi) = boxes[k];
        let h = fd_step(x[k]);
        let up = (x[k] + h).min(hi);
        let down = (x[k] - h).max(lo);
        if up <= down {
            grad[k] = 0.0;
            continue;
        }
        probe[k] = up;
        let fp = f(&probe)?;
        probe[k] = down;
        let fm = f(&probe)?;
        probe[k] = x[k];
        grad[k] = (fp - fm) / (up - down);
    }
    Ok(grad)
}

// ---------------------------------------------------------------------------
// Quadrature: composite Gauss-Legendre 10 with one bisection refinement
// ---------------------------------------------------------------------------

const GL10_NODES: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL10_WEIGHTS: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_3,
    0.219_086_362_515_982_0,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_14,
];

fn gl10<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for k in 0..5 {
        s += GL10_WEIGHTS[k] * (f(c + h * GL10_NODES[k]) + f(c - h * GL10_NODES[k]));
    }
    s * h
}

/// Integrate a smooth function over (a, b]: Gauss-Legendre order 10 per
/// roughly unit-length panel, refined by bisection when two successive
/// estimates disagree by more than 1e-12 relative.
pub(crate) fn integrate<F: Fn(f64) -> f64>(a: f64, b: f64, f: F) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let panels = ((b - a).ceil() as usize).max(1);
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let pa = a + p as f64 * width;
        let pb = if p + 1 == panels { b } else { pa + width };
        total += integrate_panel(&f, pa, pb)?;
    }
    Ok(total)
}

fn integrate_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<f64> {
    let coarse = gl10(f, a, b);
    let m = 0.5 * (a + b);
    let refined = gl10(f, a, m) + gl10(f, m, b);
    let scale = coarse.abs().max(refined.abs()).max(1e-300);
    if (coarse - refined).abs() <= 1e-12 * scale {
        return Ok(refined);
    }
    let q = 0.5 * (a + m);
    let r = 0.5 * (m + b);
    let refined2 = gl10(f, a, q) + gl10(f, q, m) + gl10(f, m, r) + gl10(f, r, b);
    let scale2 = refined.abs().max(refined2.abs()).max(1e-300);
    if (refined - refined2).abs() <= 1e-12 * scale2 {
        return Ok(refined2);
    }
    Err(CoreError::QuadratureNonConvergence {
        achieved: (refined - refined2).abs() / scale2,
    })
}
