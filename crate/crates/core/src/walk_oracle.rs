//! Exact expected spectral moments at tiny `n` by brute force over closed
//! walks.
//!
//! `E{(1/n) tr A^k} = n^{-(k/2+1)} Σ_w ω(w)` where `w` ranges over all
//! `n^k` closed index tuples and `ω(w)` is the product, over distinct
//! undirected edges (loops included), of the entry moment of order equal to
//! the edge multiplicity.

use rayon::prelude::*;

use crate::combinatorics::catalan;
use crate::ensemble::{truncated_variance, truncation_point, Distribution};
use crate::error::{Error, Result};
use crate::numeric::Dd;

/// Largest `n^k` accepted by the enumerations.
pub const WALK_GUARD: f64 = 1e7;

/// Closed-form moments `E{a_ij^m}` of the scaled entry laws.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryMomentModel {
    distribution: Distribution,
    values: Vec<f64>,
    /// `E{X^(2m)}` of the unit-variance law, indexed by `m`.
    even: Vec<f64>,
}

impl EntryMomentModel {
    /// `bound` is `K`; it only shapes the truncated gaussian.
    pub fn new(distribution: Distribution, values: Vec<f64>, bound: f64, max_order: usize) -> Result<Self> {
        let half = max_order / 2;
        let even = match distribution {
            Distribution::Rademacher => vec![1.0; half + 1],
            Distribution::Uniform => (0..=half)
                .map(|m| 3f64.powi(m as i32) / (2 * m + 1) as f64)
                .collect(),
            Distribution::TruncatedGaussian => {
                let sigma_max = values.iter().copied().fold(0.0, f64::max);
                let t = truncation_point(bound / sigma_max)?;
                let v = truncated_variance(t);
                let phi = (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
                let mass = libm::erf(t / std::f64::consts::SQRT_2);
                let mut raw = vec![1.0];
                for m in 1..=half {
                    let prev = raw[m - 1];
                    raw.push(
                        (2 * m - 1) as f64 * prev - 2.0 * t.powi(2 * m as i32 - 1) * phi / mass,
                    );
                }
                raw.iter()
                    .enumerate()
                    .map(|(m, r)| r / v.powi(m as i32))
                    .collect()
            }
        };
        Ok(EntryMomentModel {
            distribution,
            values,
            even,
        })
    }

    pub fn distribution(&self) -> Distribution {
        self.distribution
    }

    /// `E{a_ij^order}` for 0-based `i`, `j`.
    pub fn moment(&self, i: usize, j: usize, order: usize) -> f64 {
        if order % 2 == 1 {
            return 0.0;
        }
        let m = order / 2;
        (self.values[i] * self.values[j]).powi(m as i32) * self.even[m]
    }
}

fn check_guard(n: usize, k: usize) -> Result<()> {
    let requested = (n as f64).powi(k as i32);
    if requested > WALK_GUARD {
        return Err(Error::GuardExceeded {
            requested,
            limit: WALK_GUARD,
        });
    }
    Ok(())
}

/// Undirected edge multiplicities of the closed walk `idx[0] → … → idx[0]`.
fn edge_multiplicities(idx: &[usize], edges: &mut Vec<((usize, usize), usize)>) {
    edges.clear();
    let k = idx.len();
    for step in 0..k {
        let (a, b) = (idx[step], idx[(step + 1) % k]);
        let key = (a.min(b), a.max(b));
        match edges.iter_mut().find(|(e, _)| *e == key) {
            Some((_, c)) => *c += 1,
            None => edges.push((key, 1)),
        }
    }
}

fn distinct_vertices(idx: &[usize]) -> usize {
    let mut seen: Vec<usize> = idx.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// Σ ω(w) over walks starting at `first`, split by number of distinct
/// vertices (`out[p]`), with `keep` selecting which walks count.
fn walk_sums_from(
    n: usize,
    k: usize,
    first: usize,
    model: &EntryMomentModel,
    keep: &(dyn Fn(&[usize], &[((usize, usize), usize)]) -> bool + Sync),
) -> Vec<Dd> {
    let mut out = vec![Dd::ZERO; k + 1];
    let mut idx = vec![0usize; k];
    idx[0] = first;
    let mut edges = Vec::with_capacity(k);
    loop {
        edge_multiplicities(&idx, &mut edges);
        if keep(&idx, &edges) {
            let mut w = 1.0;
            for &((a, b), c) in &edges {
                w *= model.moment(a, b, c);
                if w == 0.0 {
                    break;
                }
            }
            if w != 0.0 {
                out[distinct_vertices(&idx)] += Dd::from_f64(w);
            }
        }
        // odometer over positions 1..k
        let mut pos = k;
        loop {
            pos -= 1;
            if pos == 0 {
                return out;
            }
            idx[pos] += 1;
            if idx[pos] < n {
                break;
            }
            idx[pos] = 0;
        }
    }
}

fn walk_sums(
    n: usize,
    k: usize,
    model: &EntryMomentModel,
    keep: &(dyn Fn(&[usize], &[((usize, usize), usize)]) -> bool + Sync),
) -> Result<Vec<Dd>> {
    if n == 0 || k == 0 {
        return Err(Error::InvalidArgument("walk enumeration needs n >= 1 and k >= 1".into()));
    }
    if model.values.len() < n {
        return Err(Error::InsufficientLength {
            available: model.values.len(),
            requested: n,
        });
    }
    check_guard(n, k)?;
    // Partitioned by starting vertex; partial sums are merged in index order.
    let parts: Vec<Vec<Dd>> = (0..n)
        .into_par_iter()
        .map(|first| walk_sums_from(n, k, first, model, keep))
        .collect();
    let mut total = vec![Dd::ZERO; k + 1];
    for part in parts {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    Ok(total)
}

fn normalization(n: usize, k: usize) -> f64 {
    (n as f64).powf(k as f64 / 2.0 + 1.0)
}

/// `E{(1/n) tr A^k}` for the first `n` entries of the model's sigma vector.
pub fn exact_expected_moment(n: usize, k: usize, model: &EntryMomentModel) -> Result<f64> {
    let sums = walk_sums(n, k, model, &|_, _| true)?;
    let total: Dd = sums.into_iter().sum();
    Ok(total.to_f64() / normalization(n, k))
}

/// Contribution of walks with exactly `p` distinct vertices, for every `p`.
pub fn moment_by_distinct_vertices(n: usize, k: usize, model: &EntryMomentModel) -> Result<Vec<f64>> {
    let norm = normalization(n, k);
    Ok(walk_sums(n, k, model, &|_, _| true)?
        .into_iter()
        .map(|d| d.to_f64() / norm)
        .collect())
}

fn check_dominant(n: usize, s: usize) -> Result<()> {
    if s == 0 || s > 4 {
        return Err(Error::OutOfRange {
            what: "s",
            value: s.to_string(),
            range: "1 <= s <= 4",
        });
    }
    if n == 0 || n > 8 {
        return Err(Error::OutOfRange {
            what: "n",
            value: n.to_string(),
            range: "1 <= n <= 8",
        });
    }
    Ok(())
}

fn is_dominant(s: usize) -> impl Fn(&[usize], &[((usize, usize), usize)]) -> bool + Sync {
    move |idx, edges| edges.iter().all(|&(_, c)| c == 2) && distinct_vertices(idx) == s + 1
}

/// `μ_(2s,s+1)`: the walk sum restricted to walks on `s + 1` distinct
/// vertices that use every edge exactly twice, over `n^{s+1}`.
pub fn dominant_term(n: usize, s: usize, values: &[f64]) -> Result<f64> {
    check_dominant(n, s)?;
    let model = EntryMomentModel::new(Distribution::Rademacher, values.to_vec(), 1.0, 2 * s)?;
    let sums = walk_sums(n, 2 * s, &model, &is_dominant(s))?;
    let total: Dd = sums.into_iter().sum();
    Ok(total.to_f64() / (n as f64).powi(s as i32 + 1))
}

/// Number of dominant walks of length `2s` on `n` labelled vertices.
pub fn count_dominant_walks(n: usize, s: usize) -> Result<u64> {
    check_dominant(n, s)?;
    let model = EntryMomentModel::new(Distribution::Rademacher, vec![1.0; n], 1.0, 2 * s)?;
    let sums = walk_sums(n, 2 * s, &model, &is_dominant(s))?;
    let total: Dd = sums.into_iter().sum();
    Ok(total.to_f64().round() as u64)
}

/// `n (n-1) … (n-s) · C_s`, the closed-form dominant walk count.
pub fn dominant_walk_count_formula(n: usize, s: usize) -> u64 {
    let falling: u64 = (0..=s as u64).map(|j| (n as u64).saturating_sub(j)).product();
    falling * catalan(s).map(|c| u64::try_from(c).unwrap_or(u64::MAX)).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rad(values: &[f64]) -> EntryMomentModel {
        EntryMomentModel::new(Distribution::Rademacher, values.to_vec(), 1e9, 12).unwrap()
    }

    #[test]
    fn model_low_orders() {
        let values = vec![0.5, 2.0];
        for (dist, k) in [
            (Distribution::Rademacher, 2.0),
            (Distribution::Uniform, 2.0 * 3f64.sqrt()),
            (Distribution::TruncatedGaussian, 4.0),
        ] {
            let m = EntryMomentModel::new(dist, values.clone(), k, 8).unwrap();
            assert_eq!(m.moment(0, 1, 0), 1.0);
            assert_eq!(m.moment(0, 1, 1), 0.0);
            assert!((m.moment(0, 1, 2) - 1.0).abs() < 1e-12, "{dist}");
            assert!((m.moment(1, 1, 2) - 4.0).abs() < 1e-12, "{dist}");
        }
        let u = EntryMomentModel::new(Distribution::Uniform, vec![1.0], 2.0, 4).unwrap();
        assert!((u.moment(0, 0, 4) - 9.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn truncated_moments_match_quadrature() {
        let t_ratio = 2.5;
        let m = EntryMomentModel::new(Distribution::TruncatedGaussian, vec![1.0], t_ratio, 8).unwrap();
        let t = truncation_point(t_ratio).unwrap();
        let v = truncated_variance(t);
        // midpoint rule on the conditioned density
        let steps = 200_000;
        let h = 2.0 * t / steps as f64;
        let (mut z, mut mom4, mut mom6) = (0.0, 0.0, 0.0);
        for i in 0..steps {
            let x = -t + (i as f64 + 0.5) * h;
            let w = (-0.5 * x * x).exp() * h;
            z += w;
            mom4 += w * x.powi(4);
            mom6 += w * x.powi(6);
        }
        assert!((m.moment(0, 0, 4) - mom4 / z / (v * v)).abs() < 1e-8);
        assert!((m.moment(0, 0, 6) - mom6 / z / (v * v * v)).abs() < 1e-8);
    }

    #[test]
    fn single_vertex_second_moment() {
        assert_eq!(exact_expected_moment(1, 2, &rad(&[1.0])).unwrap(), 1.0);
    }

    #[test]
    fn odd_orders_vanish() {
        let values = [0.3, 1.2, 0.7, 2.0];
        for n in 1..=4 {
            for k in [1, 3, 5, 7] {
                for dist in [Distribution::Rademacher, Distribution::Uniform] {
                    let m = EntryMomentModel::new(dist, values.to_vec(), 4.0, k).unwrap();
                    assert_eq!(exact_expected_moment(n, k, &m).unwrap(), 0.0);
                }
            }
        }
    }

    #[test]
    fn second_moment_in_closed_form() {
        // E (1/n) tr A² = (1/n²) Σ_ij σ_i σ_j = (S_1 / n)²
        let values = [0.3, 1.2, 0.7];
        let got = exact_expected_moment(3, 2, &rad(&values)).unwrap();
        let s1: f64 = values.iter().sum();
        assert!((got - (s1 / 3.0).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn fourth_moment_by_hand_for_two_vertices() {
        // walks on {0,1} of length 4, weights under Rademacher with σ = 1
        // 16 tuples; the answer is (1/8)·Σ ω
        let brute = exact_expected_moment(2, 4, &rad(&[1.0, 1.0])).unwrap();
        let mut total = 0.0;
        for code in 0..16u32 {
            let idx: Vec<usize> = (0..4).map(|b| ((code >> b) & 1) as usize).collect();
            let mut counts = std::collections::HashMap::new();
            for s in 0..4 {
                let (a, b) = (idx[s], idx[(s + 1) % 4]);
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
            if counts.values().all(|c| c % 2 == 0) {
                total += 1.0;
            }
        }
        assert_eq!(brute, total / 8.0);
    }

    #[test]
    fn guard_is_enforced() {
        assert!(matches!(
            exact_expected_moment(10, 8, &rad(&[1.0; 10])),
            Err(Error::GuardExceeded { .. })
        ));
        assert!(exact_expected_moment(4, 2, &rad(&[1.0; 3])).is_err());
    }

    #[test]
    fn dominant_term_examples() {
        assert_eq!(dominant_term(2, 1, &[1.0, 1.0]).unwrap(), 0.5);
        assert_eq!(dominant_term(2, 2, &[1.0, 1.0]).unwrap(), 0.0);
        assert!(dominant_term(9, 1, &[1.0; 9]).is_err());
    }

    #[test]
    fn dominant_term_matches_distinct_triple_sum() {
        let n = 6;
        let values: Vec<f64> = (1..=n).map(|i| (-4.0 * i as f64 / n as f64).exp()).collect();
        let mut direct = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if a != b && b != c && a != c {
                        // star rooted at a and path rooted at an end
                        direct += values[a] * values[a] * values[b] * values[c]
                            + values[a] * values[b] * values[b] * values[c];
                    }
                }
            }
        }
        let got = dominant_term(n, 2, &values).unwrap();
        assert!((got - direct / (n as f64).powi(3)).abs() < 1e-15);
    }

    #[test]
    fn dominant_walk_counts_follow_trees() {
        for s in 1..=4 {
            let n = s + 1;
            assert_eq!(count_dominant_walks(n, s).unwrap(), dominant_walk_count_formula(n, s));
        }
        assert_eq!(count_dominant_walks(6, 3).unwrap(), dominant_walk_count_formula(6, 3));
    }

    #[test]
    fn unit_dominant_term_approaches_catalan() {
        for s in 1..=3 {
            let c = catalan(s).unwrap().to_string().parse::<f64>().unwrap();
            let mut prev_gap = f64::INFINITY;
            for n in [4usize, 6, 8] {
                if n <= s {
                    continue;
                }
                let mu = dominant_term(n, s, &vec![1.0; n]).unwrap();
                let falling: f64 = (0..=s).map(|j| (n - j) as f64).product();
                assert!((mu - c * falling / (n as f64).powi(s as i32 + 1)).abs() < 1e-12);
                let gap = c - mu;
                assert!(gap >= 0.0 && gap < prev_gap);
                prev_gap = gap;
            }
        }
    }

    #[test]
    fn pigeonhole_kills_large_vertex_counts() {
        let values = [0.4, 1.1, 0.9, 1.7];
        for k in 1..=8 {
            let parts = moment_by_distinct_vertices(4, k, &rad(&values)).unwrap();
            for (p, &v) in parts.iter().enumerate() {
                if p > k / 2 + 1 {
                    assert_eq!(v, 0.0, "k={k} p={p}");
                }
            }
        }
    }

    #[test]
    fn remainder_after_dominant_term_is_nonnegative() {
        let values = [0.4, 1.1, 0.9, 1.7, 0.2, 1.0];
        for n in 2..=6 {
            for s in 1..=2 {
                let all = exact_expected_moment(n, 2 * s, &rad(&values[..n])).unwrap();
                let dom = dominant_term(n, s, &values[..n]).unwrap();
                assert!(all - dom >= -1e-15, "n={n} s={s}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn scaling_multiplies_by_c_to_the_k(values in proptest::collection::vec(0.1f64..2.0, 3), c in 0.2f64..3.0) {
            let scaled: Vec<f64> = values.iter().map(|v| v * c).collect();
            for k in [2usize, 4, 6] {
                let a = exact_expected_moment(3, k, &rad(&values)).unwrap();
                let b = exact_expected_moment(3, k, &rad(&scaled)).unwrap();
                prop_assert!((b / (a * c.powi(k as i32)) - 1.0).abs() < 1e-12);
            }
        }
    }
}
