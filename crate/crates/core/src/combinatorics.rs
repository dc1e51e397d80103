//! Degree profiles, multinomials, Catalan numbers and rooted ordered trees.
//!
//! A degree profile `r = (r_1, …, r_s)` lists how many vertices of a tree on
//! `s + 1` vertices have degree `j`. The set `R_s` of valid profiles is cut
//! out by `Σ r_j = s + 1` and `Σ j·r_j = 2s`.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Largest `s` accepted by profile enumeration and Catalan numbers.
pub const MAX_ORDER: usize = 64;
/// Largest `s` for which trees are enumerated explicitly.
pub const MAX_ENUMERATION_ORDER: usize = 11;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DegreeProfile {
    r: Vec<u32>,
}

impl DegreeProfile {
    /// Checks membership in `R_s` with `s = r.len()`.
    pub fn new(r: Vec<u32>) -> Result<DegreeProfile> {
        let s = r.len() as u64;
        let count: u64 = r.iter().map(|&x| x as u64).sum();
        let degree: u64 = r
            .iter()
            .enumerate()
            .map(|(j, &x)| (j as u64 + 1) * x as u64)
            .sum();
        if s == 0 || count != s + 1 || degree != 2 * s {
            return Err(Error::InvalidProfile(r));
        }
        Ok(DegreeProfile { r })
    }

    pub fn s(&self) -> usize {
        self.r.len()
    }

    pub fn counts(&self) -> &[u32] {
        &self.r
    }
}

fn check_order(s: usize, max: usize) -> Result<()> {
    if s == 0 || s > max {
        return Err(Error::OutOfRange {
            what: "s",
            value: s.to_string(),
            range: if max == MAX_ORDER {
                "1 <= s <= 64"
            } else {
                "1 <= s <= 11"
            },
        });
    }
    Ok(())
}

/// Calls `visit` once per profile in `R_s`, in no particular order.
///
/// Profiles correspond to partitions of `s - 1`: a vertex of degree `j >= 2`
/// contributes a part `j - 1`, and `r_1` absorbs the rest. This avoids
/// materialising the ~1.5 million profiles at `s = 64`.
pub fn for_each_degree_profile(s: usize, mut visit: impl FnMut(&[u32])) -> Result<()> {
    check_order(s, MAX_ORDER)?;
    let mut r = vec![0u32; s];
    fill_profiles(s, s, (s - 1) as u32, &mut r, &mut visit);
    Ok(())
}

fn fill_profiles(s: usize, j: usize, remaining: u32, r: &mut [u32], visit: &mut impl FnMut(&[u32])) {
    if j == 1 {
        if remaining == 0 {
            let higher: u32 = r[1..].iter().sum();
            r[0] = s as u32 + 1 - higher;
            visit(r);
        }
        return;
    }
    let part = (j - 1) as u32;
    for count in 0..=remaining / part {
        r[j - 1] = count;
        fill_profiles(s, j - 1, remaining - count * part, r, visit);
    }
    r[j - 1] = 0;
}

/// All of `R_s`, sorted lexicographically on `(r_1, …, r_s)`.
pub fn enumerate_degree_profiles(s: usize) -> Result<Vec<DegreeProfile>> {
    let mut out = Vec::new();
    for_each_degree_profile(s, |r| out.push(DegreeProfile { r: r.to_vec() }))?;
    out.sort();
    Ok(out)
}

pub fn factorial(n: u64) -> BigUint {
    (2..=n).fold(BigUint::one(), |acc, k| acc * k)
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// `total! / Π parts_i!`, exact.
pub fn multinomial(total: u64, parts: &[u64]) -> Result<BigUint> {
    let sum: u64 = parts.iter().sum();
    if sum != total {
        return Err(Error::PartsMismatch { total, sum });
    }
    // Product of binomials keeps intermediates small.
    let mut acc = BigUint::one();
    let mut used = 0;
    for &p in parts {
        used += p;
        acc *= binomial(used, p);
    }
    Ok(acc)
}

pub fn catalan(s: usize) -> Result<BigUint> {
    if s > MAX_ORDER {
        return Err(Error::OutOfRange {
            what: "s",
            value: s.to_string(),
            range: "0 <= s <= 64",
        });
    }
    let s = s as u64;
    Ok(binomial(2 * s, s) / (s + 1))
}

/// A rooted ordered tree stored as its preorder child counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PlaneTree {
    child_counts: Vec<u32>,
}

impl PlaneTree {
    pub fn new(child_counts: Vec<u32>) -> Result<PlaneTree> {
        let mut pending: i64 = 1;
        for (k, &c) in child_counts.iter().enumerate() {
            pending += c as i64 - 1;
            let last = k + 1 == child_counts.len();
            if (pending < 1 && !last) || (last && pending != 0) {
                return Err(Error::InvalidArgument(format!(
                    "{child_counts:?} is not a preorder child-count sequence"
                )));
            }
        }
        if child_counts.is_empty() {
            return Err(Error::InvalidArgument("empty tree".into()));
        }
        Ok(PlaneTree { child_counts })
    }

    pub fn child_counts(&self) -> &[u32] {
        &self.child_counts
    }

    pub fn vertices(&self) -> usize {
        self.child_counts.len()
    }

    pub fn edges(&self) -> usize {
        self.child_counts.len() - 1
    }
}

/// Lazily yields every plane tree on a fixed number of vertices, starting
/// from the star and proceeding in decreasing lexicographic order.
#[derive(Debug, Clone)]
pub struct PlaneTrees {
    current: Option<Vec<u32>>,
}

impl Iterator for PlaneTrees {
    type Item = PlaneTree;

    fn next(&mut self) -> Option<PlaneTree> {
        let out = self.current.take()?;
        self.current = successor(&out);
        Some(PlaneTree { child_counts: out })
    }
}

/// Pending slots before each position, for the prefix `c[..len]`.
fn pending_before(c: &[u32], len: usize) -> Vec<i64> {
    let mut out = Vec::with_capacity(len + 1);
    let mut pending = 1i64;
    out.push(pending);
    for &x in &c[..len] {
        pending += x as i64 - 1;
        out.push(pending);
    }
    out
}

/// Fills positions `from..s` greedily with the largest admissible counts.
fn fill_max(c: &mut [u32], from: usize, mut pending: i64) {
    let s = c.len() - 1;
    for (k, slot) in c.iter_mut().enumerate().take(s).skip(from) {
        let hi = s as i64 - k as i64 + 1 - pending;
        *slot = hi as u32;
        pending += hi - 1;
    }
    c[s] = 0;
}

fn successor(c: &[u32]) -> Option<Vec<u32>> {
    let s = c.len() - 1;
    let pending = pending_before(c, s);
    for k in (0..s).rev() {
        let lo = (2 - pending[k]).max(0) as u32;
        if c[k] > lo {
            let mut next = c.to_vec();
            next[k] -= 1;
            let after = pending[k] + next[k] as i64 - 1;
            fill_max(&mut next, k + 1, after);
            return Some(next);
        }
    }
    None
}

/// Iterator over all rooted ordered trees with `vertices` vertices.
pub fn enumerate_plane_trees(vertices: usize) -> Result<PlaneTrees> {
    if !(2..=MAX_ENUMERATION_ORDER + 1).contains(&vertices) {
        return Err(Error::OutOfRange {
            what: "vertices",
            value: vertices.to_string(),
            range: "2 <= vertices <= 12",
        });
    }
    let mut first = vec![0u32; vertices];
    fill_max(&mut first, 0, 1);
    Ok(PlaneTrees {
        current: Some(first),
    })
}

/// Graph degrees: the root has degree equal to its child count, every other
/// vertex one more (its parent edge).
pub fn degree_profile_of(tree: &PlaneTree) -> DegreeProfile {
    let s = tree.edges();
    let mut r = vec![0u32; s];
    for (k, &c) in tree.child_counts.iter().enumerate() {
        let degree = c as usize + usize::from(k != 0);
        r[degree - 1] += 1;
    }
    DegreeProfile { r }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountMode {
    ClosedForm,
    Enumeration,
}

/// Number of plane trees on `s + 1` vertices with the given profile.
pub fn tree_count(profile: &DegreeProfile, mode: CountMode) -> Result<BigUint> {
    match mode {
        CountMode::ClosedForm => Ok(closed_form_count(profile.counts())),
        CountMode::Enumeration => {
            check_order(profile.s(), MAX_ENUMERATION_ORDER)?;
            Ok(enumerated_counts(profile.s())?
                .remove(profile)
                .unwrap_or_default())
        }
    }
}

/// `2/(s+1) · (s+1)!/Π r_j!`, i.e. `2·s!/Π r_j!`.
///
/// The leading factor `2/(s+1)` is the normalization that makes the
/// multinomial agree with explicit enumeration; see
/// [`fitted_normalization`].
pub fn closed_form_count(r: &[u32]) -> BigUint {
    let s = r.len() as u64;
    let parts: Vec<u64> = r.iter().map(|&x| x as u64).collect();
    let mult = multinomial(s + 1, &parts).expect("profile sums to s + 1");
    let (q, rem) = (mult * 2u32).div_rem(&BigUint::from(s + 1));
    debug_assert!(rem.is_zero());
    q
}

/// Tree counts per profile from a single enumeration pass.
pub fn enumerated_counts(s: usize) -> Result<BTreeMap<DegreeProfile, BigUint>> {
    check_order(s, MAX_ENUMERATION_ORDER)?;
    let mut out: BTreeMap<DegreeProfile, BigUint> = BTreeMap::new();
    for tree in enumerate_plane_trees(s + 1)? {
        *out.entry(degree_profile_of(&tree)).or_default() += 1u32;
    }
    Ok(out)
}

/// The constant `c` with `count = c · multinomial(s+1; r)` for every
/// profile in `R_s`, as a reduced fraction `(num, den)`, or `None` if no
/// single constant fits the enumerated counts.
pub fn fitted_normalization(s: usize) -> Result<Option<(BigUint, BigUint)>> {
    let counts = enumerated_counts(s)?;
    let mut fitted: Option<(BigUint, BigUint)> = None;
    for profile in enumerate_degree_profiles(s)? {
        let count = counts.get(&profile).cloned().unwrap_or_default();
        let parts: Vec<u64> = profile.counts().iter().map(|&x| x as u64).collect();
        let mult = multinomial(s as u64 + 1, &parts)?;
        let g = count.gcd(&mult);
        let ratio = (&count / &g, &mult / &g);
        match &fitted {
            None => fitted = Some(ratio),
            Some(prev) if *prev == ratio => {}
            Some(_) => return Ok(None),
        }
    }
    Ok(fitted)
}
