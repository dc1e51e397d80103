//! Limiting even moments and finite-n bounds on expected spectral moments.
//!
//! Every formula here is a weighted sum over degree profiles `r ∈ R_s`,
//! each weighted by the number of plane trees with that profile. The weights
//! are exact big integers; the products of `Λ_j` (or `S_(n,j)/n`) powers are
//! accumulated in double-double.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::combinatorics::{binomial, closed_form_count, for_each_degree_profile, MAX_ORDER};
use crate::error::{Error, Result};
use crate::numeric::{ratio_to_f64, Dd};
use crate::sigma::sigma_stats;

fn check_s(s: usize) -> Result<()> {
    if s == 0 || s > MAX_ORDER {
        return Err(Error::OutOfRange {
            what: "s",
            value: s.to_string(),
            range: "1 <= s <= 64",
        });
    }
    Ok(())
}

fn check_averages(x: &[f64], s: usize) -> Result<()> {
    if x.len() < s {
        return Err(Error::InsufficientLength {
            available: x.len(),
            requested: s,
        });
    }
    for (j, &v) in x[..s].iter().enumerate() {
        if v == f64::INFINITY {
            return Err(Error::Overflow(format!("average of order {} is not finite", j + 1)));
        }
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::NonPositive { index: j + 1, value: v });
        }
    }
    Ok(())
}

/// `Σ_{r ∈ R_s} T(r) · Π_j x_j^{r_j}` with `T(r)` the plane-tree count.
pub fn profile_sum(x: &[f64], s: usize) -> Result<Dd> {
    check_s(s)?;
    check_averages(x, s)?;
    let xd: Vec<Dd> = x[..s].iter().map(|&v| Dd::from_f64(v)).collect();
    let mut acc = Dd::ZERO;
    for_each_degree_profile(s, |r| {
        let weight = Dd::from_biguint(&closed_form_count(r));
        let mut term = weight;
        for (j, &rj) in r.iter().enumerate() {
            if rj > 0 {
                term *= xd[j].powi(rj);
            }
        }
        acc += term;
    })?;
    Ok(acc)
}

/// Limiting `m_(2s)` from the limiting averages `Λ_1..Λ_s`.
pub fn limiting_even_moment(lambdas: &[f64], s: usize) -> Result<f64> {
    let m = profile_sum(lambdas, s)?.to_f64();
    if !m.is_finite() {
        return Err(Error::Overflow(format!("m_{} is not finite", 2 * s)));
    }
    Ok(m)
}

/// `m_2, m_4, …, m_(2 s_max)`.
pub fn limiting_even_moments(lambdas: &[f64], s_max: usize) -> Result<Vec<f64>> {
    (1..=s_max).map(|s| limiting_even_moment(lambdas, s)).collect()
}

/// Exact rational `m_(2s)` for rational `Λ_j`.
pub fn limiting_even_moment_exact(lambdas: &[BigRational], s: usize) -> Result<BigRational> {
    check_s(s)?;
    if lambdas.len() < s {
        return Err(Error::InsufficientLength {
            available: lambdas.len(),
            requested: s,
        });
    }
    let mut acc = BigRational::zero();
    for_each_degree_profile(s, |r| {
        let mut term = BigRational::from_integer(closed_form_count(r).into());
        for (j, &rj) in r.iter().enumerate() {
            if rj > 0 {
                term *= num_traits::pow(lambdas[j].clone(), rj as usize);
            }
        }
        acc += term;
    })?;
    Ok(acc)
}

/// Finite-n lower bound on the expected moment `E{(1/n) tr A^(2s)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBound {
    /// The profile sum over `S_(n,j)/n`.
    pub main: f64,
    /// The overcount correction subtracted from `main`.
    pub correction: f64,
    pub value: f64,
    /// Set when `value <= 0`, i.e. the bound says nothing.
    pub vacuous: bool,
}

/// `Σ_{r} T(r) Π (S_(n,j)/n)^{r_j} − σ̂^{2s}/n^{s+1} · Σ_{j=1}^{s} C(n,j) j^{s+1−j}`.
pub fn moment_lower_bound(values: &[f64], s: usize) -> Result<LowerBound> {
    check_s(s)?;
    let n = values.len();
    if n <= s {
        return Err(Error::DimensionTooSmall { n, s });
    }
    let stats = sigma_stats(values, s)?;
    let main = profile_sum(&stats.normalized_sums(), s)?.to_f64();
    let correction = stats.sigma_max.powi(2 * s as i32) * overcount_ratio(n as u64, s as u64);
    let value = main - correction;
    Ok(LowerBound {
        main,
        correction,
        value,
        vacuous: !(value > 0.0),
    })
}

/// `Σ_{j=1}^{s} C(n,j) j^{s+1−j} / n^{s+1}`, exact until the final division.
pub fn overcount_ratio(n: u64, s: u64) -> f64 {
    let mut num = BigUint::zero();
    for j in 1..=s {
        num += binomial(n, j) * BigUint::from(j).pow((s + 1 - j) as u32);
    }
    ratio_to_f64(&num, &BigUint::from(n).pow((s + 1) as u32))
}

/// Finite-n upper bound `(1 + θ s) m_(2s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpperBound {
    pub ln_theta: f64,
    pub theta: f64,
    /// `ln((1 + θ s) m)`, finite even when `value` overflows.
    pub ln_value: f64,
    pub value: f64,
    pub overflow: bool,
}

/// `ln θ` with `θ = K² s⁶/(2nσ̂²) · (σ̂/σ̌)^{2s} · n^{s−1}/(n−s)^{s+1}`.
pub fn ln_theta(n: usize, s: usize, k: f64, sigma_max: f64, sigma_min: f64) -> f64 {
    let (nf, sf) = (n as f64, s as f64);
    2.0 * k.ln() + 6.0 * sf.ln() - std::f64::consts::LN_2 - nf.ln() - 2.0 * sigma_max.ln()
        + 2.0 * sf * (sigma_max.ln() - sigma_min.ln())
        + (sf - 1.0) * nf.ln()
        - (sf + 1.0) * (nf - sf).ln()
}

fn check_bound_inputs(n: usize, s: usize, k: f64, sigma_max: f64, sigma_min: f64) -> Result<()> {
    check_s(s)?;
    if n <= s {
        return Err(Error::DimensionTooSmall { n, s });
    }
    if !(sigma_min > 0.0 && sigma_min <= sigma_max && sigma_max <= k && k.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < sigma_min <= sigma_max <= K, got {sigma_min}, {sigma_max}, {k}"
        )));
    }
    Ok(())
}

pub fn moment_upper_bound(
    n: usize,
    s: usize,
    k: f64,
    sigma_max: f64,
    sigma_min: f64,
    m_limit: f64,
) -> Result<UpperBound> {
    check_bound_inputs(n, s, k, sigma_max, sigma_min)?;
    if !(m_limit > 0.0 && m_limit.is_finite()) {
        return Err(Error::InvalidArgument(format!("limit moment must be positive, got {m_limit}")));
    }
    let lt = ln_theta(n, s, k, sigma_max, sigma_min);
    let ln_ts = lt + (s as f64).ln();
    // ln(1 + e^x) without overflow
    let ln_factor = if ln_ts > 0.0 {
        ln_ts + (-ln_ts).exp().ln_1p()
    } else {
        ln_ts.exp().ln_1p()
    };
    let ln_value = ln_factor + m_limit.ln();
    let theta = lt.exp();
    let value = ln_value.exp();
    Ok(UpperBound {
        ln_theta: lt,
        theta,
        ln_value,
        value: if value.is_finite() { value } else { f64::INFINITY },
        overflow: !value.is_finite(),
    })
}

/// Bound on `|E{(1/n) tr A^(2s+1)}|`, kept in log space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OddBound {
    pub ln_value: f64,
    pub value: f64,
    pub overflow: bool,
}

/// `n^{−s−1/2} C(2s+1,s) (s+1)^{2(2s+3)} 2^{2s} K^{2s+1} · (q^{s+1} − 1)/(q − 1)`
/// with `q = nσ̂²/K²`.
pub fn odd_moment_bound(n: usize, s: usize, k: f64, sigma_max: f64) -> Result<OddBound> {
    if n == 0 {
        return Err(Error::OutOfRange {
            what: "n",
            value: "0".into(),
            range: "n >= 1",
        });
    }
    if !(k > 0.0 && sigma_max > 0.0 && k.is_finite() && sigma_max.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "K and sigma_max must be positive, got {k} and {sigma_max}"
        )));
    }
    let (nf, sf) = (n as f64, s as f64);
    let q = nf * sigma_max * sigma_max / (k * k);
    let e = sf + 1.0;
    let ln_geometric = if q == 1.0 {
        e.ln()
    } else if q > 1.0 {
        e * q.ln() + (-(-e * q.ln()).exp()).ln_1p() - (q - 1.0).ln()
    } else {
        (-q.powf(e)).ln_1p() - (-q).ln_1p()
    };
    let ln_value = -(sf + 0.5) * nf.ln()
        + crate::numeric::ln_biguint(&binomial(2 * s as u64 + 1, s as u64))
        + 2.0 * (2.0 * sf + 3.0) * e.ln()
        + 2.0 * sf * std::f64::consts::LN_2
        + (2.0 * sf + 1.0) * k.ln()
        + ln_geometric;
    let value = ln_value.exp();
    Ok(OddBound {
        ln_value,
        value: if value.is_finite() { value } else { f64::INFINITY },
        overflow: !value.is_finite(),
    })
}

/// One even order of a moment table.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentRow {
    pub order: usize,
    pub limit: f64,
    pub lower: Option<LowerBound>,
    pub upper: Option<UpperBound>,
}

/// Finite-n inputs for the bound columns.
#[derive(Debug, Clone, Copy)]
pub struct FiniteInputs<'a> {
    pub values: &'a [f64],
    pub k: f64,
}

/// Rows for `2s = 2, 4, …, 2 s_max`; bounds are attached when `finite` is
/// given and `n > s`.
pub fn moment_table(
    averages: &[f64],
    s_max: usize,
    finite: Option<FiniteInputs<'_>>,
) -> Result<Vec<MomentRow>> {
    let mut rows = Vec::with_capacity(s_max);
    for s in 1..=s_max {
        let limit = limiting_even_moment(averages, s)?;
        let (mut lower, mut upper) = (None, None);
        if let Some(f) = finite {
            if f.values.len() > s {
                lower = Some(moment_lower_bound(f.values, s)?);
                let hi = f.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = f.values.iter().copied().fold(f64::INFINITY, f64::min);
                upper = Some(moment_upper_bound(f.values.len(), s, f.k, hi, lo, limit)?);
            }
        }
        rows.push(MomentRow {
            order: 2 * s,
            limit,
            lower,
            upper,
        });
    }
    Ok(rows)
}

/// Converts an exact rational to the nearest double.
pub fn rational_to_f64(x: &BigRational) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    let negative = x.numer().sign() == num_bigint::Sign::Minus;
    let num = x.numer().magnitude();
    let den = x.denom().magnitude();
    let v = ratio_to_f64(num, den);
    if negative {
        -v
    } else {
        v
    }
}

/// `Λ ≡ 1` as exact rationals, for semicircle checks.
pub fn unit_averages(s: usize) -> Vec<BigRational> {
    vec![BigRational::one(); s]
}

/// Returns `Some(v)` when `x` is an integer that fits in `u64`.
pub fn rational_as_u64(x: &BigRational) -> Option<u64> {
    if x.is_integer() {
        x.to_integer().to_u64()
    } else {
        None
    }
}
