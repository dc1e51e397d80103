//! Oracle cross-checks bundled into a pass/fail report.

use std::fmt;

use num_bigint::BigUint;
use num_traits::Zero;

use crate::combinatorics::{
    catalan, closed_form_count, enumerate_degree_profiles, enumerated_counts, fitted_normalization,
};
use crate::ensemble::{
    eigenvalues, empirical_moments, run_trials, summarize, summarize_samples, Distribution, Sampler,
};
use crate::error::Result;
use crate::moments::{limiting_even_moment, limiting_even_moment_exact, rational_as_u64, unit_averages};
use crate::numeric::Dd;
use crate::radius::{build_pencil, pencil_moments, sdp_lower_bound, DEFAULT_SBAR, DEFAULT_TOL};
use crate::sigma::{limiting_averages, sigma_values, SigmaSpec};
use crate::walk_oracle::{
    count_dominant_walks, dominant_walk_count_formula, exact_expected_moment, EntryMomentModel,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed {
            write!(f, "{}: PASS ({})", self.name, self.detail)
        } else {
            write!(f, "{}: FAIL at {}", self.name, self.detail)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}

/// Closed-form tree count as a function of the profile.
pub type ClosedForm = fn(&[u32]) -> BigUint;

#[derive(Debug, Clone, Copy)]
pub struct ValidationOptions {
    pub deep: bool,
    /// Monte Carlo trials for the walk-oracle comparison.
    pub walk_trials: usize,
    pub seed: u64,
    pub closed_form: ClosedForm,
}

impl Default for ValidationOptions {
    fn default() -> ValidationOptions {
        ValidationOptions {
            deep: false,
            walk_trials: 20_000,
            seed: 2024,
            closed_form: closed_form_count,
        }
    }
}

pub fn check_catalan_partition(max_s: usize) -> Result<Check> {
    for s in 1..=max_s {
        let total: BigUint = enumerated_counts(s)?.into_values().sum();
        let expect = catalan(s)?;
        if total != expect {
            return Ok(Check {
                name: "catalan_partition",
                passed: false,
                detail: format!("s={s} (sum {total}, catalan {expect})"),
            });
        }
    }
    Ok(Check {
        name: "catalan_partition",
        passed: true,
        detail: format!("s=1..{max_s}"),
    })
}

/// Compares `closed` with enumeration on every profile; failures list the
/// first mismatching profile of each order.
pub fn check_tree_counts(max_s: usize, closed: ClosedForm) -> Result<Check> {
    let mut failures = Vec::new();
    let mut profiles = 0;
    for s in 1..=max_s {
        let counts = enumerated_counts(s)?;
        for p in enumerate_degree_profiles(s)? {
            profiles += 1;
            let enumerated = counts.get(&p).cloned().unwrap_or_else(BigUint::zero);
            let formula = closed(p.counts());
            if formula != enumerated {
                failures.push(format!("s={s} (closed {formula}, enum {enumerated})"));
                break;
            }
        }
    }
    Ok(if failures.is_empty() {
        Check {
            name: "tree_count",
            passed: true,
            detail: format!("{profiles} profiles, s=1..{max_s}"),
        }
    } else {
        Check {
            name: "tree_count",
            passed: false,
            detail: failures.join(", "),
        }
    })
}

pub fn check_semicircle(max_s: usize) -> Result<Check> {
    let mut got = Vec::new();
    for s in 1..=max_s {
        let m = limiting_even_moment_exact(&unit_averages(s), s)?;
        let expect = catalan(s)?;
        let value = rational_as_u64(&m);
        if value.map(BigUint::from) != Some(expect.clone()) {
            return Ok(Check {
                name: "semicircle_moments",
                passed: false,
                detail: format!("s={s} (formula {m}, catalan {expect})"),
            });
        }
        got.push(value.unwrap().to_string());
    }
    Ok(Check {
        name: "semicircle_moments",
        passed: true,
        detail: got.join(", "),
    })
}

pub fn check_dominant_walks() -> Result<Check> {
    for s in 1..=4 {
        let n = s + 1;
        let counted = count_dominant_walks(n, s)?;
        let formula = dominant_walk_count_formula(n, s);
        if counted != formula {
            return Ok(Check {
                name: "dominant_walks",
                passed: false,
                detail: format!("s={s} (walks {counted}, formula {formula})"),
            });
        }
    }
    Ok(Check {
        name: "dominant_walks",
        passed: true,
        detail: "n=s+1, s=1..4".into(),
    })
}

/// One walk-oracle versus Monte Carlo comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleComparison {
    pub n: usize,
    pub k: usize,
    pub exact: f64,
    pub mean: f64,
    pub stderr: f64,
}

impl OracleComparison {
    /// `|mean − exact| / stderr`. Some moments are deterministic (Rademacher
    /// `k = 2`), so the standard error is floored at rounding level.
    pub fn z_score(&self) -> f64 {
        let floor = 64.0 * f64::EPSILON * self.exact.abs();
        let se = self.stderr.max(floor);
        if se == 0.0 {
            if self.mean == self.exact {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - self.exact).abs() / se
        }
    }
}

/// Fixed, deliberately uneven profiles for the small-n comparisons.
pub fn oracle_profile(n: usize) -> Vec<f64> {
    [1.3, 0.4, 0.9, 2.1, 0.7, 1.6][..n].to_vec()
}

/// Exact walk sums against Monte Carlo for `n ∈ ns`, `k ∈ ks`.
pub fn walk_oracle_comparisons(ns: &[usize], ks: &[usize], trials: usize, seed: u64) -> Result<Vec<OracleComparison>> {
    let mut out = Vec::new();
    let k_max = ks.iter().copied().max().unwrap_or(1);
    for &n in ns {
        let values = oracle_profile(n);
        let bound = values.iter().copied().fold(0.0, f64::max);
        let model = EntryMomentModel::new(Distribution::Rademacher, values.clone(), bound, k_max)?;
        let sampler = Sampler::new(values, Distribution::Rademacher, bound)?;
        let samples = run_trials(&sampler, seed ^ n as u64, trials)?;
        let per_trial: Vec<Vec<f64>> = samples
            .iter()
            .map(|s| empirical_moments(&s.eigenvalues, k_max))
            .collect();
        for &k in ks {
            let stats = summarize(&per_trial.iter().map(|m| m[k - 1]).collect::<Vec<_>>());
            out.push(OracleComparison {
                n,
                k,
                exact: exact_expected_moment(n, k, &model)?,
                mean: stats.mean,
                stderr: stats.stderr.unwrap_or(0.0),
            });
        }
    }
    Ok(out)
}

pub fn check_walk_oracle(trials: usize, seed: u64) -> Result<Check> {
    let rows = walk_oracle_comparisons(&[2, 3, 4], &[2, 4, 6], trials, seed)?;
    let worst = rows
        .iter()
        .max_by(|a, b| a.z_score().total_cmp(&b.z_score()))
        .copied()
        .expect("non-empty");
    let odd_zero = [2usize, 3, 4].iter().all(|&n| {
        let model = EntryMomentModel::new(Distribution::Rademacher, oracle_profile(n), 3.0, 5).unwrap();
        [1, 3, 5].iter().all(|&k| exact_expected_moment(n, k, &model) == Ok(0.0))
    });
    let passed = worst.z_score() <= 4.0 && odd_zero;
    Ok(Check {
        name: "walk_oracle",
        passed,
        detail: format!(
            "n=2..4, k=2,4,6, {trials} trials, worst |z| = {:.2} at n={}, k={}; odd k exact zero: {}",
            worst.z_score(),
            worst.n,
            worst.k,
            odd_zero
        ),
    })
}

pub fn check_sdp_agreement() -> Result<Check> {
    let mut worst: f64 = 0.0;
    let mut catalan_nu = vec![Dd::ONE];
    for s in 1..=2 * DEFAULT_SBAR + 1 {
        let prev = catalan_nu[s - 1];
        catalan_nu.push(prev * Dd::from_f64((2 * (2 * s - 1)) as f64) / Dd::from_f64((s + 1) as f64));
    }
    let families = [
        catalan_nu[1..].to_vec(),
        pencil_moments(&exp_family_averages(2 * DEFAULT_SBAR + 1), DEFAULT_SBAR)?,
    ];
    for nu in &families {
        let sol = sdp_lower_bound(&build_pencil(nu, DEFAULT_SBAR)?, DEFAULT_TOL)?;
        worst = worst.max(sol.method_agreement);
    }
    Ok(Check {
        name: "sdp_agreement",
        passed: worst <= 10.0 * DEFAULT_TOL,
        detail: format!("s_bar={DEFAULT_SBAR}, max |bisection - eigen| = {worst:.3e}"),
    })
}

/// `Λ_k = (1 − e^{−4k})/(4k)` for `σ(x) = e^{−4x}`.
pub fn exp_family_averages(k_max: usize) -> Vec<f64> {
    (1..=k_max)
        .map(|k| -(-4.0 * k as f64).exp_m1() / (4.0 * k as f64))
        .collect()
}

pub fn check_scaling() -> Result<Check> {
    let c: f64 = 1.7;
    let lambdas = exp_family_averages(11);
    let scaled: Vec<f64> = lambdas
        .iter()
        .enumerate()
        .map(|(k, l)| l * c.powi(k as i32 + 1))
        .collect();
    let mut worst_moment: f64 = 0.0;
    for s in 1..=8 {
        let a = limiting_even_moment(&lambdas, s)?;
        let b = limiting_even_moment(&scaled, s)?;
        worst_moment = worst_moment.max((b / (a * c.powi(2 * s as i32)) - 1.0).abs());
    }
    let beta = |l: &[f64]| -> Result<f64> {
        Ok(sdp_lower_bound(&build_pencil(&pencil_moments(l, 5)?, 5)?, DEFAULT_TOL)?.beta)
    };
    let (ba, bb) = (beta(&lambdas)?, beta(&scaled)?);
    let beta_gap = (bb - c * c * ba).abs() / (c * c * ba);
    let values: Vec<f64> = (1..=20).map(|i| (-0.2 * i as f64).exp()).collect();
    let up: Vec<f64> = values.iter().map(|v| v * c).collect();
    let ea = eigenvalues(&Sampler::new(values.clone(), Distribution::Rademacher, values[0])?.sample(9))?;
    let eb = eigenvalues(&Sampler::new(up.clone(), Distribution::Rademacher, up[0])?.sample(9))?;
    let spectrum_gap = ea
        .iter()
        .zip(&eb)
        .map(|(x, y)| (y - c * x).abs())
        .fold(0.0, f64::max);
    let passed = worst_moment < 1e-12 && beta_gap < 10.0 * DEFAULT_TOL && spectrum_gap < 1e-12;
    Ok(Check {
        name: "scaling",
        passed,
        detail: format!(
            "moments {worst_moment:.1e}, beta {beta_gap:.1e}, spectrum {spectrum_gap:.1e}"
        ),
    })
}

/// Describes the fitted normalization of the tree-count multinomial.
pub fn normalization_note(max_s: usize) -> Result<String> {
    let mut consistent = true;
    for s in 1..=max_s {
        match fitted_normalization(s)? {
            Some((num, den)) => {
                let g = num_integer::gcd(2u64, s as u64 + 1);
                if num != BigUint::from(2 / g) || den != BigUint::from((s as u64 + 1) / g) {
                    consistent = false;
                }
            }
            None => consistent = false,
        }
    }
    Ok(if consistent {
        format!(
            "fitted tree-count normalization c(s) = 2/(s+1) for s=1..{max_s}; \
             the unnormalized 2*multinomial(s+1; r) overcounts by (s+1)"
        )
    } else {
        format!("no single normalization c(s) fits enumeration for s <= {max_s}")
    })
}

/// Empirical even moment next to the limiting formula at finite `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormulaGap {
    pub order: usize,
    pub formula: f64,
    pub mean: f64,
    pub stderr: f64,
}

impl FormulaGap {
    pub fn gap_in_stderr(&self) -> f64 {
        (self.mean - self.formula).abs() / self.stderr
    }

    pub fn flagged(&self) -> bool {
        self.gap_in_stderr() > 3.0
    }
}

/// Rademacher simulation of `m_4 … m_(2 s_max)` against the limiting formula.
pub fn formula_simulation_gaps(
    spec: &SigmaSpec,
    n: usize,
    trials: usize,
    s_max: usize,
    seed: u64,
) -> Result<Vec<FormulaGap>> {
    let lambdas = limiting_averages(spec, s_max, 1e-12)?.values;
    let values = sigma_values(spec, n)?;
    let bound = values.iter().copied().fold(0.0, f64::max);
    let sampler = Sampler::new(values, Distribution::Rademacher, bound)?;
    let report = summarize_samples(&run_trials(&sampler, seed, trials)?, 2 * s_max);
    (2..=s_max)
        .map(|s| {
            let m = report.moments[2 * s - 1];
            Ok(FormulaGap {
                order: 2 * s,
                formula: limiting_even_moment(&lambdas, s)?,
                mean: m.mean,
                stderr: m.stderr.unwrap_or(0.0),
            })
        })
        .collect()
}

pub fn run_validation(options: &ValidationOptions) -> Result<ValidationReport> {
    let max_s = if options.deep { 11 } else { 8 };
    let checks = vec![
        check_catalan_partition(max_s)?,
        check_tree_counts(max_s, options.closed_form)?,
        check_semicircle(8)?,
        check_dominant_walks()?,
        check_walk_oracle(options.walk_trials, options.seed)?,
        check_sdp_agreement()?,
        check_scaling()?,
    ];
    let mut notes = vec![normalization_note(if options.deep { 9 } else { 6 })?];
    if options.deep {
        let spec = SigmaSpec::expression("exp(-4*i/n)")?;
        for g in formula_simulation_gaps(&spec, 1000, 100, 5, options.seed)? {
            if g.flagged() {
                notes.push(format!(
                    "formula-vs-simulation gap for exp(-4*i/n), n=1000: m{} formula {:.4e}, \
                     simulated {:.4e} ± {:.1e} ({:.1} stderr)",
                    g.order,
                    g.formula,
                    g.mean,
                    g.stderr,
                    g.gap_in_stderr()
                ));
            }
        }
    }
    Ok(ValidationReport { checks, notes })
}
