//! Bounds on the spectral radius: roots of the moment bounds, and the
//! Hankel-pencil lower bound on the support of the limiting distribution.
//!
//! The pencil is built from `ν_0 = 1, ν_s = m_(2s)`, the moments of the
//! squared eigenvalue law. `β = min{x > 0 : x·H0 − H1 ⪰ 0}` lower-bounds the
//! right end of that law's support, so `√β` lower-bounds the limiting
//! spectral radius. All pencil arithmetic runs in double-double because
//! Hankel matrices of smooth moment sequences lose roughly a digit per row.

use crate::error::{Error, Result};
use crate::moments::{moment_lower_bound, moment_upper_bound, profile_sum, LowerBound, UpperBound};
use crate::numeric::Dd;

/// Default bisection tolerance on `β`.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default pencil order `s̄`.
pub const DEFAULT_SBAR: usize = 14;
/// Relative ridge added before each Cholesky attempt.
pub const RIDGE: f64 = 1e-28;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusLower {
    pub s: usize,
    /// `m̌^{1/2s}`, NaN when vacuous.
    pub value: f64,
    pub vacuous: bool,
    pub moment: LowerBound,
}

/// `E‖A‖ >= (m̌_(2s))^{1/2s}` whenever `m̌_(2s) > 0`.
pub fn radius_lower_bound(values: &[f64], s: usize) -> Result<RadiusLower> {
    let moment = moment_lower_bound(values, s)?;
    let value = if moment.vacuous {
        f64::NAN
    } else {
        moment.value.powf(1.0 / (2 * s) as f64)
    };
    Ok(RadiusLower {
        s,
        value,
        vacuous: moment.vacuous,
        moment,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusUpper {
    pub s: usize,
    /// `(n(1+θs)m)^{1/2s}`, `+∞` when `θ` overflows a double.
    pub value: f64,
    /// `ln` of the root, always finite.
    pub ln_value: f64,
    pub overflow: bool,
    pub moment: UpperBound,
}

/// `E‖A‖ <= (n (1 + θ s) m_(2s))^{1/2s}`.
pub fn radius_upper_bound(
    n: usize,
    s: usize,
    k: f64,
    sigma_max: f64,
    sigma_min: f64,
    m_limit: f64,
) -> Result<RadiusUpper> {
    let moment = moment_upper_bound(n, s, k, sigma_max, sigma_min, m_limit)?;
    let ln_value = ((n as f64).ln() + moment.ln_value) / (2 * s) as f64;
    let overflow = !moment.theta.is_finite();
    Ok(RadiusUpper {
        s,
        value: if overflow { f64::INFINITY } else { ln_value.exp() },
        ln_value,
        overflow,
        moment,
    })
}

/// `m_(2s)^{1/2s}`, which increases to the limiting radius as `s → ∞`.
pub fn moment_root(m: f64, s: usize) -> f64 {
    m.powf(1.0 / (2 * s) as f64)
}

type DdMatrix = Vec<Vec<Dd>>;

#[derive(Debug, Clone, PartialEq)]
pub struct HankelPencil {
    s_bar: usize,
    /// `ν_0 ..= ν_(2 s̄ + 1)`.
    nu: Vec<Dd>,
    h0: DdMatrix,
    h1: DdMatrix,
}

impl HankelPencil {
    /// Builds the pencil without checking `H0`; degenerate measures (finitely
    /// many atoms) give a singular `H0` and still have a well-defined `β`.
    pub fn from_moments_unchecked(moments: &[Dd], s_bar: usize) -> Result<HankelPencil> {
        if s_bar == 0 {
            return Err(Error::OutOfRange {
                what: "s_bar",
                value: "0".into(),
                range: "s_bar >= 1",
            });
        }
        let needed = 2 * s_bar + 1;
        if moments.len() < needed {
            return Err(Error::InsufficientLength {
                available: moments.len(),
                requested: needed,
            });
        }
        let mut nu = Vec::with_capacity(needed + 1);
        nu.push(Dd::ONE);
        nu.extend_from_slice(&moments[..needed]);
        let size = s_bar + 1;
        let h0 = (0..size)
            .map(|i| (0..size).map(|j| nu[i + j]).collect())
            .collect();
        let h1 = (0..size)
            .map(|i| (0..size).map(|j| nu[i + j + 1]).collect())
            .collect();
        Ok(HankelPencil { s_bar, nu, h0, h1 })
    }

    pub fn s_bar(&self) -> usize {
        self.s_bar
    }

    pub fn nu(&self) -> Vec<f64> {
        self.nu.iter().map(|d| d.to_f64()).collect()
    }

    pub fn h0(&self) -> Vec<Vec<f64>> {
        to_f64(&self.h0)
    }

    pub fn h1(&self) -> Vec<Vec<f64>> {
        to_f64(&self.h1)
    }

    /// Leading `s̄' + 1` block, i.e. the pencil of a shorter truncation.
    pub fn truncate(&self, s_bar: usize) -> Result<HankelPencil> {
        HankelPencil::from_moments_unchecked(&self.nu[1..], s_bar)
    }
}

fn to_f64(m: &DdMatrix) -> Vec<Vec<f64>> {
    m.iter()
        .map(|row| row.iter().map(|d| d.to_f64()).collect())
        .collect()
}

/// Pencil from `m_2, m_4, …` (length at least `2 s̄ + 1`), with `H0` checked
/// positive definite.
pub fn build_pencil(moments: &[Dd], s_bar: usize) -> Result<HankelPencil> {
    let pencil = HankelPencil::from_moments_unchecked(moments, s_bar)?;
    let scale = diagonal_scale(&pencil.h0);
    if let Err(pivot) = cholesky(&scaled(&pencil.h0, &scale), 0.0) {
        return Err(Error::InvalidMomentSequence {
            pivot,
            size: s_bar + 1,
        });
    }
    Ok(pencil)
}

pub fn build_pencil_f64(moments: &[f64], s_bar: usize) -> Result<HankelPencil> {
    let dd: Vec<Dd> = moments.iter().map(|&m| Dd::from_f64(m)).collect();
    build_pencil(&dd, s_bar)
}

/// Limiting moments `m_2 … m_(2(2s̄+1))` in double-double, ready for a pencil.
pub fn pencil_moments(lambdas: &[f64], s_bar: usize) -> Result<Vec<Dd>> {
    (1..=2 * s_bar + 1).map(|s| profile_sum(lambdas, s)).collect()
}

fn diagonal_scale(m: &DdMatrix) -> Vec<Dd> {
    m.iter()
        .enumerate()
        .map(|(i, row)| {
            let d = row[i];
            if d.to_f64() > 0.0 {
                d.sqrt().recip()
            } else {
                Dd::ONE
            }
        })
        .collect()
}

fn scaled(m: &DdMatrix, d: &[Dd]) -> DdMatrix {
    m.iter()
        .enumerate()
        .map(|(i, row)| row.iter().enumerate().map(|(j, &x)| x * d[i] * d[j]).collect())
        .collect()
}

fn inf_norm(m: &DdMatrix) -> f64 {
    m.iter()
        .map(|row| row.iter().map(|x| x.abs().to_f64()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Lower Cholesky factor of `m + shift·I`, or the failing pivot.
fn cholesky(m: &DdMatrix, shift: f64) -> std::result::Result<DdMatrix, usize> {
    let n = m.len();
    let shift = Dd::from_f64(shift);
    let mut l = vec![vec![Dd::ZERO; n]; n];
    for j in 0..n {
        let mut d = m[j][j] + shift;
        for k in 0..j {
            d -= l[j][k].sqr();
        }
        if !(d.to_f64() > 0.0) {
            return Err(j);
        }
        let ljj = d.sqrt();
        l[j][j] = ljj;
        for i in (j + 1)..n {
            let mut s = m[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = s / ljj;
        }
    }
    Ok(l)
}

/// Whether `x·H0 − H1` passes the ridged factorization test.
pub fn pencil_is_psd(pencil: &HankelPencil, x: f64) -> bool {
    let xd = Dd::from_f64(x);
    let m: DdMatrix = pencil
        .h0
        .iter()
        .zip(&pencil.h1)
        .map(|(r0, r1)| r0.iter().zip(r1).map(|(&a, &b)| xd * a - b).collect())
        .collect();
    let scale = diagonal_scale(&pencil.h0);
    // The ridge follows the size of the two terms, not of their difference,
    // since that is where the rounding error of x·H0 − H1 lives.
    let size = x.abs() * inf_norm(&scaled(&pencil.h0, &scale)) + inf_norm(&scaled(&pencil.h1, &scale));
    cholesky(&scaled(&m, &scale), RIDGE * size).is_ok()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpSolution {
    pub s_bar: usize,
    pub beta: f64,
    pub sqrt_beta: f64,
    /// `β` from the generalized eigenvalue route.
    pub beta_eigen: f64,
    pub method_agreement: f64,
    /// Ratio of extreme Cholesky pivots of the scaled `H0`, squared.
    pub condition_estimate: f64,
    pub iterations: usize,
}

/// Solves `min x > 0 s.t. x·H0 − H1 ⪰ 0` by bisection and cross-checks it
/// against the largest eigenvalue of the pencil `(H1, H0)`.
pub fn sdp_lower_bound(pencil: &HankelPencil, tol: f64) -> Result<SdpSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be > 0, got {tol}")));
    }
    const BRACKET_LIMIT: f64 = 1e300;
    let mut hi = 1.0;
    while !pencil_is_psd(pencil, hi) {
        hi *= 2.0;
        if hi > BRACKET_LIMIT {
            return Err(Error::BracketFailure {
                limit: BRACKET_LIMIT,
            });
        }
    }
    let mut lo = 0.0;
    let mut iterations = 0;
    while hi - lo >= tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pencil_is_psd(pencil, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    let beta = hi;
    let (beta_eigen, condition_estimate) = generalized_max_eigenvalue(pencil)?;
    Ok(SdpSolution {
        s_bar: pencil.s_bar,
        beta,
        sqrt_beta: beta.sqrt(),
        beta_eigen,
        method_agreement: (beta - beta_eigen).abs(),
        condition_estimate,
        iterations,
    })
}

/// Largest `λ` with `H1 v = λ H0 v`, via `L^{-1} H1 L^{-T}` and Jacobi.
pub fn generalized_max_eigenvalue(pencil: &HankelPencil) -> Result<(f64, f64)> {
    let scale = diagonal_scale(&pencil.h0);
    let a = scaled(&pencil.h0, &scale);
    let b = scaled(&pencil.h1, &scale);
    let n = a.len();
    let l = match cholesky(&a, RIDGE * inf_norm(&a)) {
        Ok(l) => l,
        Err(pivot) => {
            return Err(Error::Factorization {
                pivot,
                condition: f64::INFINITY,
            })
        }
    };
    let pivots: Vec<f64> = (0..n).map(|i| l[i][i].to_f64()).collect();
    let pmax = pivots.iter().copied().fold(0.0, f64::max);
    let pmin = pivots.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = (pmax / pmin).powi(2);
    // Y = L^{-1} B, then C = Y L^{-T} = L^{-1} (L^{-1} B)^T
    let y = forward_solve_columns(&l, &b);
    let yt: DdMatrix = (0..n).map(|i| (0..n).map(|j| y[j][i]).collect()).collect();
    let mut c = forward_solve_columns(&l, &yt);
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = (c[i][j] + c[j][i]) * 0.5;
            c[i][j] = avg;
            c[j][i] = avg;
        }
    }
    let eig = jacobi_eigenvalues(c)?;
    let max = eig.into_iter().map(|d| d.to_f64()).fold(f64::NEG_INFINITY, f64::max);
    Ok((max, condition))
}

/// Solves `L X = B` column by column.
fn forward_solve_columns(l: &DdMatrix, b: &DdMatrix) -> DdMatrix {
    let n = l.len();
    let mut x = vec![vec![Dd::ZERO; n]; n];
    for col in 0..n {
        for i in 0..n {
            let mut s = b[i][col];
            for k in 0..i {
                s -= l[i][k] * x[k][col];
            }
            x[i][col] = s / l[i][i];
        }
    }
    x
}

/// Cyclic Jacobi on a symmetric matrix.
fn jacobi_eigenvalues(mut a: DdMatrix) -> Result<Vec<Dd>> {
    const MAX_SWEEPS: usize = 60;
    let n = a.len();
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j].to_f64().powi(2))
            .sum();
        let diag: f64 = (0..n).map(|i| a[i][i].to_f64().powi(2)).sum();
        if off <= 1e-62 * diag {
            return Ok((0..n).map(|i| a[i][i]).collect());
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].to_f64() == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (a[p][q] * 2.0);
                let sign = if theta.to_f64() >= 0.0 { 1.0 } else { -1.0 };
                let t = Dd::from_f64(sign) / (theta.abs() + (theta.sqr() + Dd::ONE).sqrt());
                let c = (t.sqr() + Dd::ONE).sqrt().recip();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_SWEEPS,
    })
}
