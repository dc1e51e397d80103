//! Sampling, eigenvalues and Monte Carlo campaigns for the ensemble
//! `A = (a_ij / √n)` with independent entries of variance `σ_i σ_j`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricTridiagonal};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;
use crate::sigma::{sigma_values, SigmaSpec};

/// Entry law before scaling to variance `σ_i σ_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distribution {
    Rademacher,
    Uniform,
    TruncatedGaussian,
}

impl Distribution {
    pub fn name(self) -> &'static str {
        match self {
            Distribution::Rademacher => "rademacher",
            Distribution::Uniform => "uniform",
            Distribution::TruncatedGaussian => "truncated_gaussian",
        }
    }

    /// Smallest admissible `K / σ̂`; strict for the truncated gaussian.
    pub fn min_bound_ratio(self) -> f64 {
        match self {
            Distribution::Rademacher => 1.0,
            Distribution::Uniform | Distribution::TruncatedGaussian => 3f64.sqrt(),
        }
    }

    /// `K` used when the caller does not give one.
    pub fn default_bound(self, sigma_max: f64) -> f64 {
        match self {
            Distribution::Rademacher => sigma_max,
            Distribution::Uniform => 3f64.sqrt() * sigma_max,
            Distribution::TruncatedGaussian => 3.0 * sigma_max,
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Distribution> {
        match s {
            "rademacher" => Ok(Distribution::Rademacher),
            "uniform" => Ok(Distribution::Uniform),
            "truncated_gaussian" => Ok(Distribution::TruncatedGaussian),
            other => Err(Error::InvalidArgument(format!(
                "unknown distribution '{other}' (rademacher, uniform, truncated_gaussian)"
            ))),
        }
    }
}

fn std_normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `P{|Z| <= t}` for standard normal `Z`.
fn central_mass(t: f64) -> f64 {
    libm::erf(t / std::f64::consts::SQRT_2)
}

/// Variance of a standard normal conditioned on `[-t, t]`.
pub fn truncated_variance(t: f64) -> f64 {
    if t < 1e-2 {
        // series: t²/3 − t⁴/45 + …, avoids cancellation
        let t2 = t * t;
        return t2 / 3.0 - t2 * t2 / 45.0 + 2.0 * t2 * t2 * t2 / 945.0;
    }
    1.0 - 2.0 * t * std_normal_pdf(t) / central_mass(t)
}

/// Truncation point `t` with `t / √v(t) = ratio`, so that the rescaled
/// entry `√(σ_i σ_j / v) Z` never exceeds `K = ratio · σ̂`.
pub fn truncation_point(ratio: f64) -> Result<f64> {
    if !(ratio > 3f64.sqrt()) || !ratio.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "truncated gaussian needs K / sigma_max > sqrt(3), got {ratio}"
        )));
    }
    let f = |t: f64| t / truncated_variance(t).sqrt() - ratio;
    let (mut lo, mut hi) = (1e-8, ratio);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Draws a standard normal conditioned on `[-t, t]`.
fn sample_truncated<R: Rng>(rng: &mut R, t: f64) -> f64 {
    if t < 2.0 {
        loop {
            let x = t * (2.0 * rng.random::<f64>() - 1.0);
            if rng.random::<f64>() <= (-0.5 * x * x).exp() {
                return x;
            }
        }
    }
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= t {
            return z;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub n: usize,
    pub distribution: Distribution,
    /// Almost-sure bound `K` on `|a_ij|`.
    pub bound: f64,
    pub seed: u64,
    pub sigma: SigmaSpec,
}

/// A validated configuration with its sigma vector resolved.
#[derive(Debug, Clone)]
pub struct Sampler {
    values: Vec<f64>,
    distribution: Distribution,
    bound: f64,
    /// Per-distribution shape constant: truncation point for the gaussian.
    truncation: f64,
    variance_scale: f64,
}

impl Sampler {
    pub fn new(values: Vec<f64>, distribution: Distribution, bound: f64) -> Result<Sampler> {
        if values.is_empty() {
            return Err(Error::OutOfRange {
                what: "n",
                value: "0".into(),
                range: "n >= 1",
            });
        }
        let (mut arg, mut sigma_max) = (0, f64::NEG_INFINITY);
        for (i, &v) in values.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::NonPositive { index: i + 1, value: v });
            }
            if v > sigma_max {
                (arg, sigma_max) = (i, v);
            }
        }
        let ratio = bound / sigma_max;
        let min = distribution.min_bound_ratio();
        let ok = match distribution {
            Distribution::TruncatedGaussian => ratio > min,
            _ => ratio >= min * (1.0 - 1e-12),
        };
        if !ok || !bound.is_finite() {
            return Err(Error::BoundIncompatible {
                i: arg + 1,
                j: arg + 1,
                variance: sigma_max * sigma_max,
                bound,
                distribution: distribution.name(),
            });
        }
        let (truncation, variance_scale) = match distribution {
            Distribution::TruncatedGaussian => {
                let t = truncation_point(ratio)?;
                (t, 1.0 / truncated_variance(t))
            }
            Distribution::Uniform => (1.0, 3.0),
            Distribution::Rademacher => (1.0, 1.0),
        };
        Ok(Sampler {
            values,
            distribution,
            bound,
            truncation,
            variance_scale,
        })
    }

    pub fn from_config(config: &EnsembleConfig) -> Result<Sampler> {
        Sampler::new(sigma_values(&config.sigma, config.n)?, config.distribution, config.bound)
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn distribution(&self) -> Distribution {
        self.distribution
    }

    /// Truncation point of the gaussian law (1 for the other laws).
    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    /// One raw entry `a_ij`, before the `1/√n` normalization.
    pub fn entry<R: Rng>(&self, rng: &mut R, i: usize, j: usize) -> f64 {
        let scale = (self.variance_scale * self.values[i] * self.values[j]).sqrt();
        let x = match self.distribution {
            Distribution::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Distribution::Uniform => 2.0 * rng.random::<f64>() - 1.0,
            Distribution::TruncatedGaussian => sample_truncated(rng, self.truncation),
        };
        scale * x
    }

    /// Fills the upper triangle row by row, diagonal included.
    pub fn sample_with<R: Rng>(&self, rng: &mut R) -> DMatrix<f64> {
        let n = self.n();
        let norm = 1.0 / (n as f64).sqrt();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let a = self.entry(rng, i, j) * norm;
                m[(i, j)] = a;
                m[(j, i)] = a;
            }
        }
        m
    }

    pub fn sample(&self, seed: u64) -> DMatrix<f64> {
        self.sample_with(&mut ChaCha8Rng::seed_from_u64(seed))
    }
}

pub fn sample_matrix(config: &EnsembleConfig) -> Result<DMatrix<f64>> {
    Ok(Sampler::from_config(config)?.sample(config.seed))
}

/// Eigenvalues of a symmetric matrix, ascending.
///
/// Householder tridiagonalization followed by implicit QL with Wilkinson
/// shifts; each eigenvalue gets at most 50 sweeps.
pub fn eigenvalues(matrix: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::InvalidArgument(format!(
            "matrix is {}x{}, expected square",
            n,
            matrix.ncols()
        )));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let gap = (matrix[(i, j)] - matrix[(j, i)]).abs();
            if !(gap <= 1e-12) {
                return Err(Error::NotSymmetric { i, j, gap });
            }
        }
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![matrix[(0, 0)]]);
    }
    let scale = matrix.amax();
    if scale == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let (d, e) = SymmetricTridiagonal::new(matrix / scale).unpack_tridiagonal();
    let mut d: Vec<f64> = d.iter().copied().collect();
    let mut e: Vec<f64> = e.iter().copied().collect();
    e.push(0.0);
    tridiagonal_ql(&mut d, &mut e)?;
    let mut out: Vec<f64> = d.into_iter().map(|x| x * scale).collect();
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Implicit QL on the tridiagonal `(d, e)`; `e[k]` couples `k` and `k+1`.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    const MAX_SWEEPS: usize = 50;
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_SWEEPS {
                return Err(Error::NoConvergence { iterations: MAX_SWEEPS });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Eigenvalues of one Monte Carlo trial.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSample {
    pub eigenvalues: Vec<f64>,
    pub radius: f64,
    pub trial_index: u64,
    pub seed_used: u64,
}

impl SpectralSample {
    pub fn from_eigenvalues(eigenvalues: Vec<f64>, trial_index: u64, seed_used: u64) -> SpectralSample {
        let radius = match (eigenvalues.first(), eigenvalues.last()) {
            (Some(a), Some(b)) => a.abs().max(b.abs()),
            _ => 0.0,
        };
        SpectralSample {
            eigenvalues,
            radius,
            trial_index,
            seed_used,
        }
    }
}

/// `(1/n) Σ λ_i^k` for `k = 1..=k_max`.
pub fn empirical_moments(eigenvalues: &[f64], k_max: usize) -> Vec<f64> {
    let n = eigenvalues.len() as f64;
    let mut power = eigenvalues.to_vec();
    let mut out = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        if k > 1 {
            for (p, &l) in power.iter_mut().zip(eigenvalues) {
                *p *= l;
            }
        }
        out.push(pairwise_sum(&power) / n);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Values that fell outside an explicit range.
    pub outside: u64,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Half-open bins `[lo, hi)`, the last one closed. Without a range the data
/// extremes widened by `1e-9` are used.
pub fn esd_histogram(values: &[f64], bins: usize, range: Option<(f64, f64)>) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::OutOfRange {
            what: "bins",
            value: "0".into(),
            range: "bins >= 1",
        });
    }
    let (lo, hi) = match range {
        Some(r) => r,
        None if values.is_empty() => (-1.0, 1.0),
        None => {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo - 1e-9, hi + 1e-9)
        }
    };
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!("histogram range needs lo < hi, got [{lo}, {hi}]")));
    }
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins)
        .map(|b| if b == bins { hi } else { lo + b as f64 * width })
        .collect();
    let mut counts = vec![0u64; bins];
    let mut outside = 0;
    for &x in values {
        if !(x >= lo && x <= hi) {
            outside += 1;
            continue;
        }
        let b = (((x - lo) / (hi - lo)) * bins as f64).floor() as usize;
        counts[b.min(bins - 1)] += 1;
    }
    Ok(Histogram {
        edges,
        counts,
        outside,
    })
}

/// Mixes a trial index into a base seed.
pub fn trial_seed(base: u64, trial: u64) -> u64 {
    splitmix64(base ^ trial.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `trials` independent samples; results are ordered by trial index
/// and do not depend on the worker count.
pub fn run_trials(sampler: &Sampler, base_seed: u64, trials: usize) -> Result<Vec<SpectralSample>> {
    if trials == 0 {
        return Err(Error::OutOfRange {
            what: "trials",
            value: "0".into(),
            range: "trials >= 1",
        });
    }
    (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let seed = trial_seed(base_seed, t);
            let eig = eigenvalues(&sampler.sample(seed))?;
            Ok(SpectralSample::from_eigenvalues(eig, t, seed))
        })
        .collect()
}

/// Mean, standard error (absent for a single trial), min and max.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub stderr: Option<f64>,
    pub min: f64,
    pub max: f64,
}

pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    let stderr = (values.len() > 1).then(|| {
        let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        (pairwise_sum(&dev) / (n - 1.0) / n).sqrt()
    });
    Summary {
        mean,
        stderr,
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    pub trials: usize,
    /// Orders `1..=k_max`.
    pub moments: Vec<Summary>,
    pub radius: Summary,
}

pub fn summarize_samples(samples: &[SpectralSample], k_max: usize) -> MonteCarloReport {
    let per_trial: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| empirical_moments(&s.eigenvalues, k_max))
        .collect();
    let moments = (0..k_max)
        .map(|k| summarize(&per_trial.iter().map(|m| m[k]).collect::<Vec<_>>()))
        .collect();
    let radii: Vec<f64> = samples.iter().map(|s| s.radius).collect();
    MonteCarloReport {
        trials: samples.len(),
        moments,
        radius: summarize(&radii),
    }
}

pub fn monte_carlo(config: &EnsembleConfig, trials: usize, k_max: usize) -> Result<MonteCarloReport> {
    let sampler = Sampler::from_config(config)?;
    let samples = run_trials(&sampler, config.seed, trials)?;
    Ok(summarize_samples(&samples, k_max))
}
