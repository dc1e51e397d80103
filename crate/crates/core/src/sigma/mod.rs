//! Sigma profiles: the positive sequence whose outer product sets the entry
//! variances, plus the partial sums `S_(n,k)` and limiting averages `Λ_k`
//! that every moment formula consumes.

mod expr;

use std::fmt;
use std::path::Path;

pub use expr::{parse_expression, Expr};

use crate::error::{Error, Result};
use crate::numeric::Dd;

/// Declarative description of `{σ_i}`.
#[derive(Debug, Clone, PartialEq)]
pub enum SigmaSpec {
    Constant(f64),
    Expression { source: String, expr: Expr },
    Explicit(Vec<f64>),
}

impl SigmaSpec {
    pub fn constant(value: f64) -> Result<SigmaSpec> {
        check_positive(0, value)?;
        Ok(SigmaSpec::Constant(value))
    }

    pub fn explicit(values: Vec<f64>) -> Result<SigmaSpec> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("explicit sigma list is empty".into()));
        }
        for (idx, &v) in values.iter().enumerate() {
            check_positive(idx + 1, v)?;
        }
        Ok(SigmaSpec::Explicit(values))
    }

    pub fn expression(source: &str) -> Result<SigmaSpec> {
        let expr = parse_expression(source, 1)?;
        Ok(SigmaSpec::Expression {
            source: source.to_string(),
            expr,
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SigmaSpec::Constant(_) => "constant",
            SigmaSpec::Expression { .. } => "expression",
            SigmaSpec::Explicit(_) => "explicit",
        }
    }

    /// Value at 1-based index `i` for dimension `n`, unchecked.
    pub fn eval(&self, i: usize, n: usize) -> f64 {
        match self {
            SigmaSpec::Constant(c) => *c,
            SigmaSpec::Expression { expr, .. } => expr.eval(i as f64, n as f64),
            SigmaSpec::Explicit(v) => v.get(i - 1).copied().unwrap_or(f64::NAN),
        }
    }

    /// The profile `c·σ_i`.
    pub fn scaled(&self, c: f64) -> SigmaSpec {
        match self {
            SigmaSpec::Constant(v) => SigmaSpec::Constant(c * v),
            SigmaSpec::Expression { source, expr } => SigmaSpec::Expression {
                source: format!("{c:e}*({source})"),
                expr: Expr::Mul(Box::new(Expr::Number(c)), Box::new(expr.clone())),
            },
            SigmaSpec::Explicit(v) => SigmaSpec::Explicit(v.iter().map(|x| c * x).collect()),
        }
    }
}

impl fmt::Display for SigmaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaSpec::Constant(c) => write!(f, "const:{c}"),
            SigmaSpec::Expression { source, .. } => write!(f, "expr:{source}"),
            SigmaSpec::Explicit(v) => write!(f, "explicit[{}]", v.len()),
        }
    }
}

fn check_positive(index: usize, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositive { index, value })
    }
}

/// Parses `const:<float>`, `expr:<expression>` or `file:<path>`.
pub fn parse_sigma_spec(text: &str) -> Result<SigmaSpec> {
    if let Some(rest) = text.strip_prefix("const:") {
        let value = rest.trim().parse::<f64>().map_err(|_| Error::Syntax {
            column: 7,
            message: format!("invalid constant '{rest}'"),
        })?;
        return SigmaSpec::constant(value);
    }
    if let Some(rest) = text.strip_prefix("expr:") {
        let expr = parse_expression(rest, 6)?;
        return Ok(SigmaSpec::Expression {
            source: rest.to_string(),
            expr,
        });
    }
    if let Some(rest) = text.strip_prefix("file:") {
        return read_sigma_file(Path::new(rest));
    }
    Err(Error::Syntax {
        column: 1,
        message: "expected one of 'const:', 'expr:' or 'file:'".into(),
    })
}

/// One positive decimal per line; blank lines are skipped.
pub fn read_sigma_file(path: &Path) -> Result<SigmaSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::File {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v = line.parse::<f64>().map_err(|_| Error::File {
            path: path.to_path_buf(),
            reason: format!("line {}: invalid number '{line}'", lineno + 1),
        })?;
        check_positive(values.len() + 1, v)?;
        values.push(v);
    }
    SigmaSpec::explicit(values)
}

/// `[σ_1, …, σ_n]`, every entry checked finite and positive.
pub fn sigma_values(spec: &SigmaSpec, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::OutOfRange {
            what: "n",
            value: "0".into(),
            range: "n >= 1",
        });
    }
    if let SigmaSpec::Explicit(v) = spec {
        if v.len() < n {
            return Err(Error::InsufficientLength {
                available: v.len(),
                requested: n,
            });
        }
    }
    (1..=n)
        .map(|i| {
            let v = spec.eval(i, n);
            check_positive(i, v).map(|_| v)
        })
        .collect()
}

/// Partial sums and extremes of a concrete sigma vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaStats {
    pub n: usize,
    /// `partial_sums[k-1] = S_(n,k)`.
    pub partial_sums: Vec<f64>,
    pub sigma_max: f64,
    pub sigma_min: f64,
    /// Filled by [`SigmaStats::with_limits`] for specs that have a limit.
    pub limiting: Option<LimitingAverages>,
}

impl SigmaStats {
    pub fn k_max(&self) -> usize {
        self.partial_sums.len()
    }

    /// `S_(n,k) / n` for `k = 1..=k_max`.
    pub fn normalized_sums(&self) -> Vec<f64> {
        self.partial_sums
            .iter()
            .map(|s| s / self.n as f64)
            .collect()
    }

    pub fn with_limits(mut self, spec: &SigmaSpec, tol: f64) -> Result<SigmaStats> {
        self.limiting = Some(limiting_averages(spec, self.k_max(), tol)?);
        Ok(self)
    }
}

pub fn sigma_stats(values: &[f64], k_max: usize) -> Result<SigmaStats> {
    if k_max == 0 {
        return Err(Error::OutOfRange {
            what: "k_max",
            value: "0".into(),
            range: "k_max >= 1",
        });
    }
    if values.is_empty() {
        return Err(Error::InvalidArgument("empty sigma vector".into()));
    }
    let sums = power_sums_dd(values, k_max);
    let mut partial_sums = Vec::with_capacity(k_max);
    for (k, s) in sums.iter().enumerate() {
        let v = s.to_f64();
        if !v.is_finite() {
            return Err(Error::Overflow(format!("S_(n,{}) is not finite", k + 1)));
        }
        partial_sums.push(v);
    }
    let sigma_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sigma_min = values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SigmaStats {
        n: values.len(),
        partial_sums,
        sigma_max,
        sigma_min,
        limiting: None,
    })
}

/// `Σ_i σ_i^k` for k = 1..=k_max, accumulated left to right in double-double.
pub fn power_sums_dd(values: &[f64], k_max: usize) -> Vec<Dd> {
    let mut sums = vec![Dd::ZERO; k_max];
    for &v in values {
        let mut p = Dd::ONE;
        let vd = Dd::from_f64(v);
        for s in sums.iter_mut() {
            p *= vd;
            *s += p;
        }
    }
    sums
}

/// Estimated `Λ_1..Λ_k_max` with per-order convergence flags.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitingAverages {
    pub values: Vec<f64>,
    pub converged: Vec<bool>,
    /// Largest N on the ladder that was evaluated (0 for closed forms).
    pub largest_n: usize,
}

impl LimitingAverages {
    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }
}

/// Doubling-ladder settings for [`limiting_averages_with`].
#[derive(Debug, Clone, Copy)]
pub struct Ladder {
    pub start: usize,
    /// Ladder stops after `start · 2^max_doublings` terms.
    pub max_doublings: u32,
    /// Deepest Richardson column; higher columns amplify rounding noise.
    pub max_extrapolation: usize,
}

impl Default for Ladder {
    fn default() -> Ladder {
        Ladder {
            start: 10_000,
            max_doublings: 12,
            max_extrapolation: 6,
        }
    }
}

pub fn limiting_averages(spec: &SigmaSpec, k_max: usize, tol: f64) -> Result<LimitingAverages> {
    limiting_averages_with(spec, k_max, tol, Ladder::default())
}

/// Λ_k from `(1/N) S_(N,k)` along `N, 2N, 4N, …`.
///
/// Successive ladder values are combined by Richardson extrapolation in
/// powers of `1/N` (the error expansion of a Riemann sum of a smooth
/// profile); order k is converged once two consecutive extrapolants differ by
/// less than `tol`.
pub fn limiting_averages_with(
    spec: &SigmaSpec,
    k_max: usize,
    tol: f64,
    ladder: Ladder,
) -> Result<LimitingAverages> {
    if k_max == 0 {
        return Err(Error::OutOfRange {
            what: "k_max",
            value: "0".into(),
            range: "k_max >= 1",
        });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be > 0, got {tol}")));
    }
    match spec {
        SigmaSpec::Explicit(_) => Err(Error::NoLimit),
        SigmaSpec::Constant(c) => Ok(LimitingAverages {
            values: (1..=k_max).map(|k| c.powi(k as i32)).collect(),
            converged: vec![true; k_max],
            largest_n: 0,
        }),
        SigmaSpec::Expression { .. } => ladder_estimate(spec, k_max, tol, ladder),
    }
}

fn ladder_estimate(
    spec: &SigmaSpec,
    k_max: usize,
    tol: f64,
    ladder: Ladder,
) -> Result<LimitingAverages> {
    // rows[level][col][k]
    let mut rows: Vec<Vec<Vec<Dd>>> = Vec::new();
    let mut converged = vec![false; k_max];
    let mut best = vec![Dd::ZERO; k_max];
    let mut n = ladder.start;
    for level in 0..=ladder.max_doublings as usize {
        let values = sigma_values(spec, n)?;
        let inv_n = Dd::ONE / Dd::from_f64(n as f64);
        let base: Vec<Dd> = power_sums_dd(&values, k_max)
            .into_iter()
            .map(|s| s * inv_n)
            .collect();
        let mut row = vec![base];
        let depth = level.min(ladder.max_extrapolation);
        for col in 1..=depth {
            let factor = Dd::from_f64(((1u64 << col) - 1) as f64);
            let prev_row = &rows[level - 1][col - 1];
            let next: Vec<Dd> = row[col - 1]
                .iter()
                .zip(prev_row)
                .map(|(&cur, &prev)| cur + (cur - prev) / factor)
                .collect();
            row.push(next);
        }
        let estimate = row.last().unwrap().clone();
        if level > 0 {
            let prev = rows[level - 1].last().unwrap();
            for k in 0..k_max {
                if !converged[k] {
                    let diff = (estimate[k] - prev[k]).abs().to_f64();
                    if diff < tol {
                        converged[k] = true;
                    }
                    best[k] = estimate[k];
                }
            }
        } else {
            best.clone_from(&estimate);
        }
        rows.push(row);
        if converged.iter().all(|&c| c) {
            return Ok(LimitingAverages {
                values: best.iter().map(|d| d.to_f64()).collect(),
                converged,
                largest_n: n,
            });
        }
        if level < ladder.max_doublings as usize {
            n *= 2;
        }
    }
    Ok(LimitingAverages {
        values: best.iter().map(|d| d.to_f64()).collect(),
        converged,
        largest_n: n,
    })
}

/// One row of the growth-condition diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthPoint {
    pub n: usize,
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub max_over_log_n: f64,
}

/// Evaluates `σ̂_n / log n` and `σ̌_n` along a geometric grid of `n`.
///
/// Finite data cannot decide `σ̂_n = O(log n)` or `σ̌_n = Θ(1)`; callers read
/// the trend.
pub fn growth_diagnostic(spec: &SigmaSpec, grid: &[usize]) -> Result<Vec<GrowthPoint>> {
    grid.iter()
        .map(|&n| {
            let values = sigma_values(spec, n)?;
            let sigma_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sigma_min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let log_n = (n.max(2) as f64).ln();
            Ok(GrowthPoint {
                n,
                sigma_max,
                sigma_min,
                max_over_log_n: sigma_max / log_n,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn exp_family() -> SigmaSpec {
        parse_sigma_spec("expr:exp(-4*i/n)").unwrap()
    }

    #[test]
    fn parses_the_three_spec_kinds() {
        assert_eq!(parse_sigma_spec("const:1").unwrap(), SigmaSpec::Constant(1.0));
        let spec = exp_family();
        assert_eq!(spec.kind(), "expression");
        assert!((spec.eval(1000, 1000) - 0.018_315_638_888_734_18).abs() < 1e-15);

        let dir = std::env::temp_dir().join(format!("sigma-file-{}", std::process::id()));
        std::fs::write(&dir, "0.5\n\n0.25\n").unwrap();
        let spec = parse_sigma_spec(&format!("file:{}", dir.display())).unwrap();
        assert_eq!(spec, SigmaSpec::Explicit(vec![0.5, 0.25]));
        std::fs::remove_file(&dir).unwrap();
    }

    #[test]
    fn parse_errors() {
        match parse_sigma_spec("expr:exp(-4*i/n").unwrap_err() {
            Error::Syntax { column, message } => {
                assert_eq!(column, 16);
                assert!(message.contains("unbalanced parenthesis"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_sigma_spec("file:/definitely/not/here.txt"),
            Err(Error::File { .. })
        ));
        assert!(matches!(parse_sigma_spec("const:-1"), Err(Error::NonPositive { .. })));
        assert!(matches!(parse_sigma_spec("const:abc"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_sigma_spec("nope"), Err(Error::Syntax { column: 1, .. })));
    }

    #[test]
    fn values_of_each_kind() {
        assert_eq!(
            sigma_values(&SigmaSpec::Constant(1.0), 3).unwrap(),
            vec![1.0, 1.0, 1.0]
        );
        let v = sigma_values(&exp_family(), 2).unwrap();
        assert!((v[0] - (-2f64).exp()).abs() < 1e-16);
        assert!((v[1] - (-4f64).exp()).abs() < 1e-16);
        assert_eq!(
            sigma_values(&SigmaSpec::Explicit(vec![0.5, 0.25]), 3),
            Err(Error::InsufficientLength {
                available: 2,
                requested: 3
            })
        );
    }

    #[test]
    fn non_positive_evaluation_reports_index() {
        let spec = parse_sigma_spec("expr:1-i/3").unwrap();
        assert_eq!(
            sigma_values(&spec, 4),
            Err(Error::NonPositive {
                index: 3,
                value: 0.0
            })
        );
        let spec = parse_sigma_spec("expr:log(i-1)").unwrap();
        assert!(matches!(
            sigma_values(&spec, 2),
            Err(Error::NonPositive { index: 1, .. })
        ));
    }

    #[test]
    fn stats_by_hand() {
        let st = sigma_stats(&[1.0, 1.0, 1.0], 2).unwrap();
        assert_eq!(st.partial_sums, vec![3.0, 3.0]);
        assert_eq!((st.sigma_max, st.sigma_min), (1.0, 1.0));
        let st = sigma_stats(&[2.0, 1.0], 3).unwrap();
        assert_eq!(st.partial_sums, vec![3.0, 5.0, 9.0]);
        assert_eq!((st.sigma_max, st.sigma_min), (2.0, 1.0));
        assert!(matches!(sigma_stats(&[1e200], 2), Err(Error::Overflow(_))));
    }

    #[test]
    fn exp_family_finite_average_matches_geometric_series() {
        let n = 1000usize;
        let v = sigma_values(&exp_family(), n).unwrap();
        let st = sigma_stats(&v, 1).unwrap();
        // e^{-4/n}(1-e^{-4}) / (n(1-e^{-4/n}))
        let q = (-4.0 / n as f64).exp();
        let closed = q * (1.0 - (-4f64).exp()) / (n as f64 * (1.0 - q));
        assert!((st.partial_sums[0] / n as f64 - closed).abs() < 1e-13);
        assert!((closed - 0.24493).abs() < 5e-6);
    }

    #[test]
    fn constant_limits_are_exact_powers() {
        let lim = limiting_averages(&SigmaSpec::Constant(1.0), 4, 1e-12).unwrap();
        assert_eq!(lim.values, vec![1.0; 4]);
        assert!(lim.all_converged());
        let lim = limiting_averages(&SigmaSpec::Constant(0.5), 3, 1e-12).unwrap();
        assert_eq!(lim.values, vec![0.5, 0.25, 0.125]);
    }

    #[test]
    fn exp_family_limits_match_closed_forms() {
        let lim = limiting_averages(&exp_family(), 2, 1e-10).unwrap();
        assert!(lim.all_converged());
        let l1 = (1.0 - (-4f64).exp()) / 4.0;
        let l2 = (1.0 - (-8f64).exp()) / 8.0;
        assert!((lim.values[0] - l1).abs() < 1e-10, "{:?}", lim.values);
        assert!((lim.values[1] - l2).abs() < 1e-10);
        assert!((lim.values[0] - 0.245_421_1).abs() < 1e-7);
        assert!((lim.values[1] - 0.124_958_1).abs() < 1e-7);
    }

    #[test]
    fn explicit_specs_have_no_limit() {
        assert_eq!(
            limiting_averages(&SigmaSpec::Explicit(vec![1.0]), 1, 1e-8),
            Err(Error::NoLimit)
        );
    }

    #[test]
    fn divergent_profile_is_flagged_not_converged() {
        let spec = parse_sigma_spec("expr:log(i+1)").unwrap();
        let ladder = Ladder {
            max_doublings: 3,
            ..Ladder::default()
        };
        let lim = limiting_averages_with(&spec, 1, 1e-10, ladder).unwrap();
        assert!(!lim.converged[0]);
        assert_eq!(lim.largest_n, 80_000);
    }

    #[test]
    fn growth_diagnostic_reports_trend() {
        let pts = growth_diagnostic(&exp_family(), &[10, 100, 1000]).unwrap();
        assert_eq!(pts.len(), 3);
        assert!(pts[2].max_over_log_n < pts[0].max_over_log_n);
        assert!((pts[2].sigma_min - (-4f64).exp()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn stats_respect_extreme_bounds(values in proptest::collection::vec(0.01f64..5.0, 1..60), k in 1usize..6) {
            let st = sigma_stats(&values, k).unwrap();
            let n = values.len() as f64;
            prop_assert!(st.sigma_min <= st.sigma_max);
            for (j, s) in st.partial_sums.iter().enumerate() {
                let p = (j + 1) as i32;
                prop_assert!(*s > 0.0);
                prop_assert!(n * st.sigma_min.powi(p) <= s * (1.0 + 1e-12));
                prop_assert!(*s <= n * st.sigma_max.powi(p) * (1.0 + 1e-12));
            }
        }

        #[test]
        fn partial_sums_scale_by_c_to_the_k(values in proptest::collection::vec(0.1f64..2.0, 1..40), c in 0.2f64..3.0) {
            let a = sigma_stats(&values, 5).unwrap();
            let scaled: Vec<f64> = values.iter().map(|v| c * v).collect();
            let b = sigma_stats(&scaled, 5).unwrap();
            for k in 0..5 {
                let expect = a.partial_sums[k] * c.powi(k as i32 + 1);
                prop_assert!((b.partial_sums[k] / expect - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn limits_below_one_decrease_in_k(values in proptest::collection::vec(0.05f64..1.0, 1..30)) {
            let spec = SigmaSpec::explicit(values.clone()).unwrap();
            // finite-n averages of a profile bounded by 1 are monotone in k
            let st = sigma_stats(&sigma_values(&spec, values.len()).unwrap(), 6).unwrap();
            let avg = st.normalized_sums();
            for w in avg.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn limits_scale_with_sigma() {
        let base = limiting_averages(&exp_family(), 4, 1e-12).unwrap();
        let c = 1.7;
        let scaled = limiting_averages(&exp_family().scaled(c), 4, 1e-12).unwrap();
        for k in 0..4 {
            let expect = base.values[k] * c.powi(k as i32 + 1);
            assert!((scaled.values[k] / expect - 1.0).abs() < 1e-10);
        }
    }
}
