//! Nonsynchronous observation grids, the normalized overlap matrix G, the
//! windowed spectral functionals of the sampling scheme, and Monte Carlo
//! estimation of their limit constants a_p and f_p.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::linalg::{sym_power_diagonals, Csr};
use crate::rng::{rng_from_seed_stream, sub_seed};
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

// ---------------------------------------------------------------------------
// SamplingScheme
// ---------------------------------------------------------------------------

/// Two strictly increasing observation grids on [0, n h_n], one per
/// coordinate, both pinned to the endpoints 0 and T_n = n h_n.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SamplingScheme {
    grid1: Vec<f64>,
    grid2: Vec<f64>,
    n: usize,
    h_n: f64,
}

impl SamplingScheme {
    pub fn new(grid1: Vec<f64>, grid2: Vec<f64>, n: usize, h_n: f64) -> Result<Self> {
        if !(h_n > 0.0) || n == 0 {
            return Err(CoreError::InvalidScheme(format!(
                "need n >= 1 and h_n > 0, got n = {n}, h_n = {h_n}"
            )));
        }
        let t_n = n as f64 * h_n;
        for (name, g) in [("grid1", &grid1), ("grid2", &grid2)] {
            if g.len() < 2 {
                return Err(CoreError::InvalidScheme(format!(
                    "{name} needs at least the two endpoint observations"
                )));
            }
            if g[0] != 0.0 {
                return Err(CoreError::InvalidScheme(format!(
                    "{name} must start at 0, got {}",
                    g[0]
                )));
            }
            let last = *g.last().unwrap();
            if (last - t_n).abs() > 1e-9 * t_n.max(1.0) {
                return Err(CoreError::InvalidScheme(format!(
                    "{name} must end at T_n = {t_n}, got {last}"
                )));
            }
            for w in g.windows(2) {
                if !(w[1] > w[0]) {
                    return Err(CoreError::InvalidScheme(format!(
                        "{name} is not strictly increasing at t = {}",
                        w[1]
                    )));
                }
            }
        }
        let mut grid1 = grid1;
        let mut grid2 = grid2;
        *grid1.last_mut().unwrap() = t_n;
        *grid2.last_mut().unwrap() = t_n;
        Ok(SamplingScheme {
            grid1,
            grid2,
            n,
            h_n,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h_n(&self) -> f64 {
        self.h_n
    }

    pub fn t_n(&self) -> f64 {
        self.n as f64 * self.h_n
    }

    pub fn grid(&self, l: usize) -> &[f64] {
        match l {
            1 => &self.grid1,
            2 => &self.grid2,
            _ => panic!("coordinate index must be 1 or 2"),
        }
    }

    /// Number of observation intervals of coordinate l.
    pub fn m(&self, l: usize) -> usize {
        self.grid(l).len() - 1
    }

    pub fn m_total(&self) -> usize {
        self.m(1) + self.m(2)
    }

    /// Interval I_i^l = (lo, hi], i in 0..m(l).
    pub fn interval(&self, l: usize, i: usize) -> (f64, f64) {
        let g = self.grid(l);
        (g[i], g[i + 1])
    }

    /// r_n: the largest interval length over both grids.
    pub fn max_gap(&self) -> f64 {
        let mut r = 0.0_f64;
        for g in [&self.grid1, &self.grid2] {
            for w in g.windows(2) {
                r = r.max(w[1] - w[0]);
            }
        }
        r
    }
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// Scheme generators used by the experiment harness.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SchemeGenerator {
    /// Jump times of two independent homogeneous Poisson processes, time
    /// scaled so that the counting process over [0, T_n] equals the unscaled
    /// process over [0, n].
    Poisson { lambda1: f64, lambda2: f64 },
    /// grid1 = {0, h_n, ..., n h_n}; grid2 shifted by offset2 * h_n.
    Equidistant { offset2: f64 },
}

impl SchemeGenerator {
    pub fn generate(&self, n: usize, h_n: f64, seed: u64) -> Result<SamplingScheme> {
        match *self {
            SchemeGenerator::Poisson { lambda1, lambda2 } => {
                generate_poisson(lambda1, lambda2, n, h_n, seed).map(|(s, _)| s)
            }
            SchemeGenerator::Equidistant { offset2 } => generate_equidistant(n, h_n, offset2),
        }
    }
}

/// Draw one Poisson scheme; returns the scheme and the number of retries that
/// were needed because a coordinate came up with no interior point.
pub fn generate_poisson(
    lambda1: f64,
    lambda2: f64,
    n: usize,
    h_n: f64,
    seed: u64,
) -> Result<(SamplingScheme, u32)> {
    if !(lambda1 > 0.0 && lambda2 > 0.0) {
        return Err(CoreError::ConfigError(format!(
            "Poisson intensities must be positive, got ({lambda1}, {lambda2})"
        )));
    }
    let t_n = n as f64 * h_n;
    let horizon = n as f64;
    let mut retries = 0u32;
    loop {
        let mut rng = rng_from_seed_stream(seed, retries as u64);
        let mut grids = Vec::with_capacity(2);
        let mut ok = true;
        for &lambda in &[lambda1, lambda2] {
            let mut g = vec![0.0];
            let mut t = 0.0;
            loop {
                let u: f64 = rng.gen::<f64>();
                t -= (1.0 - u).ln() / lambda;
                if t >= horizon {
                    break;
                }
                g.push(t * h_n);
            }
            if g.len() == 1 {
                ok = false;
            }
            g.push(t_n);
            grids.push(g);
        }
        if ok {
            let g2 = grids.pop().unwrap();
            let g1 = grids.pop().unwrap();
            return SamplingScheme::new(g1, g2, n, h_n).map(|s| (s, retries));
        }
        retries += 1;
        if retries > 1000 {
            return Err(CoreError::InvalidScheme(format!(
                "Poisson generator produced empty grids 1000 times (lambda n = {})",
                lambda1.min(lambda2) * horizon
            )));
        }
    }
}

/// Equidistant grids; `offset2 = 0` reproduces grid1, otherwise grid2 is the
/// offset2 * h_n shift with endpoints clamped to 0 and T_n.
pub fn generate_equidistant(n: usize, h_n: f64, offset2: f64) -> Result<SamplingScheme> {
    if !(0.0..1.0).contains(&offset2) {
        return Err(CoreError::ConfigError(format!(
            "offset2 = {offset2} must lie in [0, 1)"
        )));
    }
    let t_n = n as f64 * h_n;
    let grid1: Vec<f64> = (0..=n).map(|i| i as f64 * h_n).collect();
    let grid2 = if offset2 == 0.0 {
        grid1.clone()
    } else {
        let mut g = vec![0.0];
        for i in 0..n {
            let t = (i as f64 + offset2) * h_n;
            if t > 0.0 && t < t_n {
                g.push(t);
            }
        }
        g.push(t_n);
        g
    };
    let mut s = SamplingScheme::new(grid1, grid2, n, h_n)?;
    // pin the shared final point bit-exactly
    *s.grid1.last_mut().unwrap() = t_n;
    *s.grid2.last_mut().unwrap() = t_n;
    Ok(s)
}

// ---------------------------------------------------------------------------
// Overlap matrix
// ---------------------------------------------------------------------------

/// Sparse M1 x M2 matrix of normalized interval overlaps
/// [G]_{ij} = |I_i^1 n I_j^2| / (|I_i^1|^{1/2} |I_j^2|^{1/2}),
/// together with the raw overlaps and the interval-length vectors.
#[derive(Debug, Clone)]
pub struct OverlapMatrix {
    pub(crate) g: Csr,
    raw: Vec<f64>,
    len1: Vec<f64>,
    len2: Vec<f64>,
    sqrt_len1: Vec<f64>,
    sqrt_len2: Vec<f64>,
}

impl OverlapMatrix {
    pub fn m1(&self) -> usize {
        self.g.nrows
    }

    pub fn m2(&self) -> usize {
        self.g.ncols
    }

    pub fn nnz(&self) -> usize {
        self.g.nnz()
    }

    /// Interval lengths |I_i^l|.
    pub fn lengths(&self, l: usize) -> &[f64] {
        match l {
            1 => &self.len1,
            2 => &self.len2,
            _ => panic!("coordinate index must be 1 or 2"),
        }
    }

    /// The weight vectors (|I_i^l|^{1/2})_i.
    pub fn sqrt_lengths(&self, l: usize) -> &[f64] {
        match l {
            1 => &self.sqrt_len1,
            2 => &self.sqrt_len2,
            _ => panic!("coordinate index must be 1 or 2"),
        }
    }

    /// Iterate the nonzero list as (i, j, raw overlap, normalized entry).
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        (0..self.m1()).flat_map(move |i| {
            let (cols, vals) = self.g.row(i);
            let base = self.g.row_ptr[i];
            cols.iter().zip(vals).enumerate().map(move |(k, (j, v))| {
                (i, *j as usize, self.raw[base + k], *v)
            })
        })
    }

    /// Largest eigenvalue of G G^T by power iteration (the squared operator
    /// norm of G); 200 iterations from the normalized all-ones vector.
    pub fn operator_norm_sq(&self) -> f64 {
        let m1 = self.m1();
        let m2 = self.m2();
        let mut x = vec![1.0 / (m1 as f64).sqrt(); m1];
        let mut w = vec![0.0; m2];
        let mut y = vec![0.0; m1];
        let mut lambda = 0.0;
        for _ in 0..200 {
            self.g.matvec_t(&x, &mut w);
            self.g.matvec(&w, &mut y);
            lambda = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            for (xi, yi) in x.iter_mut().zip(&y) {
                *xi = yi / norm;
            }
        }
        lambda
    }
}

/// Enumerate overlapping interval pairs with a linear two-pointer sweep.
pub fn build_overlap(scheme: &SamplingScheme) -> OverlapMatrix {
    let g1 = scheme.grid(1);
    let g2 = scheme.grid(2);
    let m1 = g1.len() - 1;
    let m2 = g2.len() - 1;
    let len1: Vec<f64> = g1.windows(2).map(|w| w[1] - w[0]).collect();
    let len2: Vec<f64> = g2.windows(2).map(|w| w[1] - w[0]).collect();
    let sqrt_len1: Vec<f64> = len1.iter().map(|v| v.sqrt()).collect();
    let sqrt_len2: Vec<f64> = len2.iter().map(|v| v.sqrt()).collect();

    let mut triplets = Vec::with_capacity(m1 + m2);
    let mut raw = Vec::with_capacity(m1 + m2);
    let mut j = 0usize;
    for i in 0..m1 {
        let (a1, b1) = (g1[i], g1[i + 1]);
        while g2[j + 1] <= a1 {
            j += 1;
        }
        let mut jj = j;
        while jj < m2 && g2[jj] < b1 {
            let ov = (b1.min(g2[jj + 1]) - a1.max(g2[jj])).max(0.0);
            if ov > 0.0 {
                triplets.push((i as u32, jj as u32, ov / (sqrt_len1[i] * sqrt_len2[jj])));
                raw.push(ov);
            }
            jj += 1;
        }
    }
    let g = Csr::from_sorted_triplets(m1, m2, &triplets);
    OverlapMatrix {
        g,
        raw,
        len1,
        len2,
        sqrt_len1,
        sqrt_len2,
    }
}

// ---------------------------------------------------------------------------
// Window partitions
// ---------------------------------------------------------------------------

/// A partition 0 = s_0 < s_1 < ... < s_q = T_n with gaps in (0, 1].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WindowPartition {
    bounds: Vec<f64>,
}

impl WindowPartition {
    /// Unit-length windows s_k = k, with a final fractional window when T_n
    /// is not an integer.
    pub fn unit(t_n: f64) -> Self {
        let mut bounds = Vec::new();
        let mut k = 0.0;
        while k < t_n - 1e-9 {
            bounds.push(k);
            k += 1.0;
        }
        bounds.push(t_n);
        WindowPartition { bounds }
    }

    pub fn from_bounds(bounds: Vec<f64>, t_n: f64) -> Result<Self> {
        if bounds.len() < 2 || bounds[0] != 0.0 {
            return Err(CoreError::ConfigError(
                "window partition must start at 0 and contain at least one window".into(),
            ));
        }
        if (bounds.last().unwrap() - t_n).abs() > 1e-9 * t_n.max(1.0) {
            return Err(CoreError::ConfigError(format!(
                "window partition must end at T_n = {t_n}"
            )));
        }
        for w in bounds.windows(2) {
            let gap = w[1] - w[0];
            if !(gap > 0.0 && gap <= 1.0 + 1e-12) {
                return Err(CoreError::ConfigError(format!(
                    "window gaps must lie in (0, 1], got {gap}"
                )));
            }
        }
        Ok(WindowPartition { bounds })
    }

    pub fn count(&self) -> usize {
        self.bounds.len() - 1
    }

    pub fn length(&self, k: usize) -> f64 {
        self.bounds[k + 1] - self.bounds[k]
    }

    pub fn describe(&self) -> String {
        format!(
            "{} windows on (0, {}], max gap {:.6}",
            self.count(),
            self.bounds.last().unwrap(),
            self.bounds
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(0.0_f64, f64::max)
        )
    }

    /// Per-window index ranges of intervals whose right endpoint falls in
    /// (s_{k-1}, s_k]; `rights` must be ascending.
    fn assign(&self, rights: &[f64]) -> Vec<core::ops::Range<usize>> {
        let mut out = Vec::with_capacity(self.count());
        let mut i = 0usize;
        for k in 0..self.count() {
            let hi = self.bounds[k + 1];
            let start = i;
            while i < rights.len() && rights[i] <= hi {
                i += 1;
            }
            out.push(start..i);
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Windowed functionals
// ---------------------------------------------------------------------------

/// Per-window traces h_n tr(E_k (G G^T)^p); `values[p - 1][k]`.
#[derive(Debug, Clone)]
pub struct WindowedTraces {
    pub values: Vec<Vec<f64>>,
    /// Count of coordinate-l intervals per window (M_{l,k}), l = 1, 2.
    pub window_counts: [Vec<usize>; 2],
}

/// Per-window traces of the powers of G G^T restricted by the right-endpoint
/// selector of coordinate 1, scaled by h_n.
pub fn trace_powers(
    scheme: &SamplingScheme,
    overlap: &OverlapMatrix,
    p_max: usize,
    windows: &WindowPartition,
) -> WindowedTraces {
    let d = sym_power_diagonals(&overlap.g, p_max);
    let rights1 = &scheme.grid(1)[1..];
    let rights2 = &scheme.grid(2)[1..];
    let ranges1 = windows.assign(rights1);
    let ranges2 = windows.assign(rights2);
    let h = scheme.h_n();
    let mut values = vec![vec![0.0; windows.count()]; p_max];
    for (p, diag) in d.iter().enumerate() {
        for (k, r) in ranges1.iter().enumerate() {
            values[p][k] = h * diag[r.clone()].iter().sum::<f64>();
        }
    }
    WindowedTraces {
        values,
        window_counts: [
            ranges1.iter().map(|r| r.len()).collect(),
            ranges2.iter().map(|r| r.len()).collect(),
        ],
    }
}

/// The three interval-length-weighted forms of the scheme: `f11[p][k]`,
/// `f12[p][k]`, `f22[p][k]` for p = 0..=p_max.
#[derive(Debug, Clone)]
pub struct WeightedFunctionals {
    pub f11: Vec<Vec<f64>>,
    pub f12: Vec<Vec<f64>>,
    pub f22: Vec<Vec<f64>>,
}

/// Window-restricted quadratic/bilinear forms
/// I_1^T E_k (G G^T)^p I_1,  I_1^T E_k (G G^T)^p G I_2,  I_2^T E_k (G^T G)^p I_2
/// computed by sparse matrix-vector products.
pub fn weighted_functionals(
    scheme: &SamplingScheme,
    overlap: &OverlapMatrix,
    p_max: usize,
    windows: &WindowPartition,
) -> WeightedFunctionals {
    let g = &overlap.g;
    let m1 = overlap.m1();
    let m2 = overlap.m2();
    let i1 = overlap.sqrt_lengths(1);
    let i2 = overlap.sqrt_lengths(2);
    let ranges1 = windows.assign(&scheme.grid(1)[1..]);
    let ranges2 = windows.assign(&scheme.grid(2)[1..]);
    let q = windows.count();

    let windowed1 = |v: &[f64]| -> Vec<f64> {
        ranges1
            .iter()
            .map(|r| r.clone().map(|i| i1[i] * v[i]).sum())
            .collect()
    };
    let windowed2 = |v: &[f64]| -> Vec<f64> {
        ranges2
            .iter()
            .map(|r| r.clone().map(|j| i2[j] * v[j]).sum())
            .collect()
    };

    let mut f11 = vec![vec![0.0; q]; p_max + 1];
    let mut f12 = vec![vec![0.0; q]; p_max + 1];
    let mut f22 = vec![vec![0.0; q]; p_max + 1];

    let mut u = i1.to_vec();
    let mut qv = vec![0.0; m1];
    g.matvec(i2, &mut qv);
    let mut s = i2.to_vec();
    let mut scratch1 = vec![0.0; m1];
    let mut scratch2 = vec![0.0; m2];

    for p in 0..=p_max {
        f11[p] = windowed1(&u);
        f12[p] = windowed1(&qv);
        f22[p] = windowed2(&s);
        if p == p_max {
            break;
        }
        g.matvec_t(&u, &mut scratch2);
        g.matvec(&scratch2, &mut scratch1);
        u.copy_from_slice(&scratch1);
        g.matvec_t(&qv, &mut scratch2);
        g.matvec(&scratch2, &mut scratch1);
        qv.copy_from_slice(&scratch1);
        g.matvec(&s, &mut scratch1);
        g.matvec_t(&scratch1, &mut scratch2);
        s.copy_from_slice(&scratch2);
    }
    WeightedFunctionals { f11, f12, f22 }
}

// ---------------------------------------------------------------------------
// Scheme constants
// ---------------------------------------------------------------------------

/// Estimated (or analytic) limit constants of the sampling scheme with Monte
/// Carlo standard errors: a_0^l, a_p (p >= 1), f_p^{11}, f_p^{12}, f_p^{22}
/// (p >= 0).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SchemeConstants {
    pub a0: [f64; 2],
    pub a0_se: [f64; 2],
    /// a_p for p = 1..=p_max.
    pub a: Vec<f64>,
    pub a_se: Vec<f64>,
    /// f_p^{11} for p = 0..=p_max.
    pub f11: Vec<f64>,
    pub f11_se: Vec<f64>,
    pub f12: Vec<f64>,
    pub f12_se: Vec<f64>,
    pub f22: Vec<f64>,
    pub f22_se: Vec<f64>,
    pub replications: usize,
    pub window_description: String,
}

impl SchemeConstants {
    pub fn p_max(&self) -> usize {
        self.a.len()
    }

    /// Exact constants of the synchronous equidistant scheme: a_0^l = 1,
    /// a_p = 1 and f_p = 1 for every p.
    pub fn synchronous(p_max: usize) -> Self {
        SchemeConstants {
            a0: [1.0, 1.0],
            a0_se: [0.0, 0.0],
            a: vec![1.0; p_max],
            a_se: vec![0.0; p_max],
            f11: vec![1.0; p_max + 1],
            f11_se: vec![0.0; p_max + 1],
            f12: vec![1.0; p_max + 1],
            f12_se: vec![0.0; p_max + 1],
            f22: vec![1.0; p_max + 1],
            f22_se: vec![0.0; p_max + 1],
            replications: 0,
            window_description: "analytic synchronous constants".into(),
        }
    }

    /// Structural invariants: positive a_0^l, nonnegative a_p nonincreasing
    /// in p, nonnegative diagonal f forms.
    pub fn validate(&self) -> Result<()> {
        if !(self.a0[0] > 0.0 && self.a0[1] > 0.0) {
            return Err(CoreError::ConfigError(format!(
                "a_0 constants must be positive, got {:?}",
                self.a0
            )));
        }
        let slack = 1e-9 * (1.0 + self.a.first().copied().unwrap_or(0.0));
        let mut prev = f64::INFINITY;
        for (p, &v) in self.a.iter().enumerate() {
            if v < -slack || v > prev + slack {
                return Err(CoreError::ConfigError(format!(
                    "a_p must be nonnegative and nonincreasing; violated at p = {}",
                    p + 1
                )));
            }
            prev = v;
        }
        if self.f11.iter().chain(&self.f22).any(|&v| v < -1e-12) {
            return Err(CoreError::ConfigError(
                "diagonal f_p forms must be nonnegative".into(),
            ));
        }
        if self.f11.len() != self.a.len() + 1
            || self.f12.len() != self.f11.len()
            || self.f22.len() != self.f11.len()
        {
            return Err(CoreError::ConfigError(
                "f_p arrays must cover p = 0..=p_max".into(),
            ));
        }
        Ok(())
    }
}

fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let r = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / r;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (r - 1.0);
    (mean, (var / r).sqrt())
}

/// Estimate the limit constants by averaging the windowed functionals per
/// unit time over `replications` independent scheme draws, discarding one
/// window at each end of the horizon.
pub fn estimate_constants(
    generator: &SchemeGenerator,
    replications: usize,
    p_max: usize,
    n: usize,
    h_n: f64,
    windows: &WindowPartition,
    base_seed: u64,
) -> Result<SchemeConstants> {
    if replications < 2 {
        return Err(CoreError::ConfigError(format!(
            "constant estimation needs at least 2 replications, got {replications}"
        )));
    }
    if p_max == 0 {
        return Err(CoreError::ConfigError("p_max must be at least 1".into()));
    }
    let q = windows.count();
    if q < 3 {
        return Err(CoreError::ConfigError(format!(
            "window partition has {q} windows; at least 3 are needed after boundary trimming"
        )));
    }
    let retained = 1..(q - 1);
    let ret_len: f64 = retained.clone().map(|k| windows.length(k)).sum();

    let mut a0_samples = [Vec::with_capacity(replications), Vec::with_capacity(replications)];
    let mut a_samples = vec![Vec::with_capacity(replications); p_max];
    let mut f11_samples = vec![Vec::with_capacity(replications); p_max + 1];
    let mut f12_samples = vec![Vec::with_capacity(replications); p_max + 1];
    let mut f22_samples = vec![Vec::with_capacity(replications); p_max + 1];

    for d in 0..replications {
        let scheme = generator.generate(n, h_n, sub_seed(base_seed, d as u64))?;
        let overlap = build_overlap(&scheme);
        let traces = trace_powers(&scheme, &overlap, p_max, windows);
        let forms = weighted_functionals(&scheme, &overlap, p_max, windows);
        for l in 0..2 {
            let count: usize = retained.clone().map(|k| traces.window_counts[l][k]).sum();
            a0_samples[l].push(h_n * count as f64 / ret_len);
        }
        for p in 1..=p_max {
            let s: f64 = retained.clone().map(|k| traces.values[p - 1][k]).sum();
            a_samples[p - 1].push(s / ret_len);
        }
        for p in 0..=p_max {
            let s11: f64 = retained.clone().map(|k| forms.f11[p][k]).sum();
            let s12: f64 = retained.clone().map(|k| forms.f12[p][k]).sum();
            let s22: f64 = retained.clone().map(|k| forms.f22[p][k]).sum();
            f11_samples[p].push(s11 / ret_len);
            f12_samples[p].push(s12 / ret_len);
            f22_samples[p].push(s22 / ret_len);
        }
    }

    let collect = |samples: &[Vec<f64>]| -> (Vec<f64>, Vec<f64>) {
        samples.iter().map(|s| mean_and_se(s)).unzip()
    };
    let (a, a_se) = collect(&a_samples);
    let (f11, f11_se) = collect(&f11_samples);
    let (f12, f12_se) = collect(&f12_samples);
    let (f22, f22_se) = collect(&f22_samples);
    let (a0_1, a0_1_se) = mean_and_se(&a0_samples[0]);
    let (a0_2, a0_2_se) = mean_and_se(&a0_samples[1]);

    let constants = SchemeConstants {
        a0: [a0_1, a0_2],
        a0_se: [a0_1_se, a0_2_se],
        a,
        a_se,
        f11,
        f11_se,
        f12,
        f12_se,
        f22,
        f22_se,
        replications,
        window_description: windows.describe(),
    };
    constants.validate()?;
    Ok(constants)
}

/// Empirical proxies for the moment and empty-gap conditions on the counting
/// processes: q-th moments of h_n-window counts and the frequency of empty
/// windows of width u h_n.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CountingDiagnostics {
    /// Moments of the per-h_n-window count, orders 1, 2 and 4, per coordinate.
    pub count_moments: [[f64; 3]; 2],
    /// Fraction of empty windows of width u h_n for u in {1, 2, 4, 8}.
    pub empty_window_freq: [[f64; 4]; 2],
}

pub fn counting_diagnostics(scheme: &SamplingScheme) -> CountingDiagnostics {
    let mut count_moments = [[0.0; 3]; 2];
    let mut empty = [[0.0; 4]; 2];
    let h = scheme.h_n();
    for (li, l) in [1usize, 2].iter().enumerate() {
        let interior = &scheme.grid(*l)[1..scheme.grid(*l).len() - 1];
        for (ui, u) in [1usize, 2, 4, 8].iter().enumerate() {
            let width = *u as f64 * h;
            let nwin = (scheme.t_n() / width).floor() as usize;
            if nwin == 0 {
                continue;
            }
            let mut counts = vec![0usize; nwin];
            for &t in interior {
                let k = (t / width) as usize;
                if k < nwin {
                    counts[k] += 1;
                }
            }
            if *u == 1 {
                let nf = nwin as f64;
                count_moments[li][0] = counts.iter().map(|&c| c as f64).sum::<f64>() / nf;
                count_moments[li][1] = counts.iter().map(|&c| (c * c) as f64).sum::<f64>() / nf;
                count_moments[li][2] =
                    counts.iter().map(|&c| (c as f64).powi(4)).sum::<f64>() / nf;
            }
            empty[li][ui] = counts.iter().filter(|&&c| c == 0).count() as f64 / nwin as f64;
        }
    }
    CountingDiagnostics {
        count_moments,
        empty_window_freq: empty,
    }
}
