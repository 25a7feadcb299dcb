//! Galton–Watson representation of the hierarchical lattice and the
//! homogeneous (pure) model.
//!
//! A block of size `2^n` is the generation-`n` population of a binary
//! Galton–Watson tree whose nodes have no children with probability
//! `(B-1)/B` and two children with probability `1/B`. Leaves are indexed
//! from 1, so leaf `i` sits in block `ceil(i / 2^p)` at level `p`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_size, Error, Result};
use crate::logdomain::recursion_step;

/// Largest depth accepted by the dense dynamic programs.
pub const DEFAULT_N_MAX: usize = 16;
/// Largest depth for which [`enumerate_gw`] lists every outcome (677 at depth 4).
pub const ENUMERATION_MAX_DEPTH: usize = 4;
/// Hard cap on iterations in [`pure_free_energy`]; `2^-n` underflows shortly after.
const PURE_MAX_STEPS: usize = 1060;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    b: f64,
    n: usize,
}

impl LatticeSpec {
    pub fn new(b: f64, n: usize) -> Result<Self> {
        check_geometry(b)?;
        Ok(Self { b, n })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of leaves, `2^n`.
    pub fn leaves(&self) -> u64 {
        1u64 << self.n
    }

    /// Probability that a node has no children.
    pub fn p_extinct(&self) -> f64 {
        (self.b - 1.0) / self.b
    }

    pub fn with_depth(&self, n: usize) -> Self {
        Self { b: self.b, n }
    }
}

pub(crate) fn check_geometry(b: f64) -> Result<()> {
    if b.is_finite() && b > 1.0 && b < 2.0 {
        Ok(())
    } else {
        Err(Error::arg(format!("B must lie in (1, 2), got {b}")))
    }
}

/// `K_B = (B^2 + B - 1) / (B (B - 1))`, the normalization that turns the
/// sub-recursion into a submultiplicative one.
pub fn k_b(b: f64) -> f64 {
    (b * b + b - 1.0) / (b * (b - 1.0))
}

/// The scalar map `x -> (x^2 + B - 1) / B`. Fixed points are `B - 1` (stable)
/// and `1` (unstable).
pub fn recursion_map(x: f64, b: f64) -> f64 {
    (x * x + b - 1.0) / b
}

/// Hierarchical distance: the smallest `p` such that `i` and `j` share a
/// block of size `2^p`. Indices are 1-based.
pub fn tree_distance(i: u64, j: u64) -> u32 {
    assert!(i >= 1 && j >= 1, "leaf indices are 1-based");
    let x = (i - 1) ^ (j - 1);
    u64::BITS - x.leading_zeros()
}

/// Sorted set of 1-based leaf indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct LeafSet(Vec<u64>);

impl LeafSet {
    pub fn new(leaves: impl IntoIterator<Item = u64>) -> Self {
        let mut v: Vec<u64> = leaves.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        LeafSet(v)
    }

    pub fn empty() -> Self {
        LeafSet(Vec::new())
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: u64) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn is_subset(&self, other: &LeafSet) -> bool {
        self.0.iter().all(|&i| other.contains(i))
    }

    /// Sibling closure holds: leaf `2i-1` is present iff leaf `2i` is.
    pub fn is_complete(&self) -> bool {
        self.0.iter().all(|&i| {
            let sibling = if i % 2 == 1 { i + 1 } else { i - 1 };
            self.contains(sibling)
        })
    }

    fn check_within(&self, spec: &LatticeSpec) -> Result<()> {
        match self.0.first().zip(self.0.last()) {
            Some((&lo, &hi)) if lo < 1 || hi > spec.leaves() => Err(Error::arg(format!(
                "leaf set must lie in 1..={}, got {:?}",
                spec.leaves(),
                self.0
            ))),
            _ => Ok(()),
        }
    }
}

/// Number of internal nodes (root included, leaves excluded) on the union
/// of root-to-leaf paths towards `set`.
pub fn subtree_node_count(spec: &LatticeSpec, set: &LeafSet) -> Result<u64> {
    if set.is_empty() {
        return Err(Error::arg("node count of an empty leaf set is undefined"));
    }
    set.check_within(spec)?;
    let mut total = 0u64;
    for level in 1..=spec.n {
        let mut blocks: Vec<u64> = set.as_slice().iter().map(|&i| (i - 1) >> level).collect();
        blocks.dedup();
        total += blocks.len() as u64;
    }
    Ok(total)
}

/// `P_n(all leaves of I survive) = B^{-v(n, I)}`, and 1 for the empty set.
pub fn gw_marginal(spec: &LatticeSpec, set: &LeafSet) -> Result<f64> {
    if set.is_empty() {
        return Ok(1.0);
    }
    let v = subtree_node_count(spec, set)?;
    Ok(spec.b.powi(-(v as i32)))
}

/// One realizable Galton–Watson outcome with its exact probability.
#[derive(Debug, Clone, PartialEq)]
pub struct GwOutcome {
    pub leaves: LeafSet,
    pub probability: BigRational,
}

impl GwOutcome {
    pub fn probability_f64(&self) -> f64 {
        self.probability.to_f64().unwrap_or(f64::NAN)
    }
}

/// Every outcome of the depth-`n` tree, probabilities in exact rationals
/// (the `f64` value of `B` is itself an exact dyadic rational).
pub fn enumerate_gw(spec: &LatticeSpec) -> Result<Vec<GwOutcome>> {
    check_size("enumeration depth", spec.n, ENUMERATION_MAX_DEPTH)?;
    let b = BigRational::from_float(spec.b).ok_or_else(|| Error::arg("B is not finite"))?;
    let p_branch = BigRational::one() / &b;
    let p_die = (&b - BigRational::one()) / &b;

    let mut level = vec![GwOutcome {
        leaves: LeafSet::new([1]),
        probability: BigRational::one(),
    }];
    for m in 0..spec.n {
        let shift = 1u64 << m;
        let mut next = Vec::with_capacity(1 + level.len() * level.len());
        next.push(GwOutcome {
            leaves: LeafSet::empty(),
            probability: p_die.clone(),
        });
        for left in &level {
            for right in &level {
                let leaves = LeafSet::new(
                    left.leaves
                        .as_slice()
                        .iter()
                        .copied()
                        .chain(right.leaves.as_slice().iter().map(|&i| i + shift)),
                );
                let probability = &p_branch * &left.probability * &right.probability;
                next.push(GwOutcome { leaves, probability });
            }
        }
        level = next;
    }
    Ok(level)
}

/// Exact sum of the outcome probabilities (should be 1).
pub fn total_probability(outcomes: &[GwOutcome]) -> BigRational {
    outcomes
        .iter()
        .fold(BigRational::new(BigInt::zero(), BigInt::one()), |acc, o| acc + &o.probability)
}

/// `log E_n[exp(u S_n)]`, the pure partition function at field `u`.
pub fn pure_log_partition(spec: &LatticeSpec, u: f64) -> Result<f64> {
    check_finite("field", u)?;
    let mut l = u;
    for _ in 0..spec.n {
        l = recursion_step(2.0 * l, spec.b);
    }
    Ok(l)
}

/// Pure free energy together with the deterministic finite-size bracket
/// it was read from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PureFreeEnergy {
    pub value: f64,
    pub n_used: usize,
    pub lower: f64,
    pub upper: f64,
    pub bracket_width: f64,
}

/// Free energy `lim 2^-n log Z_n` of the pure model.
///
/// For `n >= 1`, `2^-n log(Z_n / B)` increases and `2^-n log(K_B Z_n)`
/// decreases to the limit; the depth is raised until their gap is below
/// `tol`.
pub fn pure_free_energy(b: f64, u: f64, tol: f64) -> Result<PureFreeEnergy> {
    if !(tol > 0.0) {
        return Err(Error::arg(format!("tol must be positive, got {tol}")));
    }
    pure_free_energy_until(b, u, |_, gap| gap <= tol)
        .map_err(|e| match e {
            Error::Unresolved(_) => Error::Unresolved(format!(
                "pure free energy bracket did not reach tol={tol} at B={b}, u={u}"
            )),
            e => e,
        })
}

/// As [`pure_free_energy`], stopping once the bracket is positive and its
/// width is at most `rel_tol` times its lower end. Needed close to the
/// critical point, where the free energy is far below any fixed tolerance.
pub fn pure_free_energy_relative(b: f64, u: f64, rel_tol: f64) -> Result<PureFreeEnergy> {
    if !(rel_tol > 0.0) {
        return Err(Error::arg(format!("rel_tol must be positive, got {rel_tol}")));
    }
    pure_free_energy_until(b, u, |lower, gap| lower > 0.0 && gap <= rel_tol * lower).map_err(|e| match e {
        Error::Unresolved(_) => Error::Unresolved(format!(
            "pure free energy bracket did not reach relative tol={rel_tol} at B={b}, u={u}"
        )),
        e => e,
    })
}

fn pure_free_energy_until(b: f64, u: f64, done: impl Fn(f64, f64) -> bool) -> Result<PureFreeEnergy> {
    check_geometry(b)?;
    check_finite("field", u)?;
    if u <= 0.0 {
        // Z_n <= 1 for every n
        return Ok(PureFreeEnergy {
            value: 0.0,
            n_used: 0,
            lower: 0.0,
            upper: 0.0,
            bracket_width: 0.0,
        });
    }
    let log_b = b.ln();
    let log_kb = k_b(b).ln();
    let mut l = u;
    for n in 1..=PURE_MAX_STEPS {
        l = recursion_step(2.0 * l, b);
        if !l.is_finite() {
            break;
        }
        let scale = 0.5f64.powi(n as i32);
        let lower = (scale * (l - log_b)).max(0.0);
        let upper = scale * (l + log_kb);
        if done(lower, upper - lower) {
            return Ok(PureFreeEnergy {
                value: 0.5 * (lower + upper),
                n_used: n,
                lower,
                upper,
                bracket_width: upper - lower,
            });
        }
    }
    Err(Error::Unresolved(String::new()))
}

/// Pure critical exponent `nu = log 2 / log(2/B)`.
pub fn pure_exponent(b: f64) -> Result<f64> {
    check_geometry(b)?;
    Ok(std::f64::consts::LN_2 / (2.0 / b).ln())
}

/// Law of the contact number `S_n` under the Galton–Watson measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactDistribution {
    pub n: usize,
    pub pmf: Vec<f64>,
}

impl ContactDistribution {
    pub fn total(&self) -> f64 {
        self.pmf.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(s, p)| s as f64 * p).sum()
    }

    /// `log E[exp(u S_n)]` evaluated directly from the pmf.
    pub fn log_mgf(&self, u: f64) -> f64 {
        let terms: Vec<f64> = self
            .pmf
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(s, &p)| p.ln() + u * s as f64)
            .collect();
        crate::logdomain::log_sum_exp(&terms)
    }
}

pub fn contact_distribution(spec: &LatticeSpec) -> Result<ContactDistribution> {
    check_size("depth", spec.n, DEFAULT_N_MAX)?;
    let p_branch = 1.0 / spec.b;
    let p_die = spec.p_extinct();
    let mut pmf = vec![0.0, 1.0];
    for _ in 0..spec.n {
        let len = 2 * pmf.len() - 1;
        let mut next = vec![0.0; len];
        // support is on even s from the first step on
        let stride = if pmf.len() > 2 { 2 } else { 1 };
        for i in (0..pmf.len()).step_by(stride) {
            let pi = pmf[i];
            if pi == 0.0 {
                continue;
            }
            for j in (0..pmf.len()).step_by(stride) {
                next[i + j] += p_branch * pi * pmf[j];
            }
        }
        next[0] += p_die;
        pmf = next;
    }
    Ok(ContactDistribution { n: spec.n, pmf })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(b: f64, n: usize) -> LatticeSpec {
        LatticeSpec::new(b, n).unwrap()
    }

    #[test]
    fn rejects_bad_geometry() {
        for b in [1.0, 2.0, 0.5, f64::NAN, 2.5] {
            assert!(matches!(LatticeSpec::new(b, 3), Err(Error::Argument(_))));
        }
    }

    #[test]
    fn distances() {
        assert_eq!(tree_distance(1, 1), 0);
        assert_eq!(tree_distance(1, 2), 1);
        assert_eq!(tree_distance(1, 3), 2);
        assert_eq!(tree_distance(3, 1), 2);
        assert_eq!(tree_distance(4, 5), 3);
        assert_eq!(tree_distance(5, 8), 2);
    }

    #[test]
    fn node_counts() {
        assert_eq!(subtree_node_count(&spec(1.5, 1), &LeafSet::new([1, 2])).unwrap(), 1);
        assert_eq!(subtree_node_count(&spec(1.5, 2), &LeafSet::new([1])).unwrap(), 2);
        assert_eq!(subtree_node_count(&spec(1.5, 2), &LeafSet::new([1, 3])).unwrap(), 3);
        assert_eq!(subtree_node_count(&spec(1.5, 0), &LeafSet::new([1])).unwrap(), 0);
        assert!(subtree_node_count(&spec(1.5, 2), &LeafSet::empty()).is_err());
        assert!(subtree_node_count(&spec(1.5, 2), &LeafSet::new([5])).is_err());
    }

    #[test]
    fn marginals() {
        let s = spec(1.5, 2);
        assert!((gw_marginal(&s, &LeafSet::new([1, 3])).unwrap() - 1.5f64.powi(-3)).abs() < 1e-15);
        assert_eq!(gw_marginal(&s, &LeafSet::empty()).unwrap(), 1.0);
        for n in 0..6 {
            let s = spec(1.3, n);
            let m = gw_marginal(&s, &LeafSet::new([1])).unwrap();
            assert!((m - 1.3f64.powi(-(n as i32))).abs() < 1e-15);
        }
    }

    #[test]
    fn enumeration_counts_and_total() {
        let expected = [1usize, 2, 5, 26, 677];
        for (n, &g) in expected.iter().enumerate() {
            let outs = enumerate_gw(&spec(1.37, n)).unwrap();
            assert_eq!(outs.len(), g);
            assert!(total_probability(&outs).is_one());
            for o in &outs {
                assert!(o.leaves.is_complete() || n == 0);
            }
        }
        assert!(matches!(
            enumerate_gw(&spec(1.5, 5)),
            Err(Error::SizeLimit { .. })
        ));
    }

    #[test]
    fn enumeration_depth_one() {
        let outs = enumerate_gw(&spec(1.5, 1)).unwrap();
        assert!(outs[0].leaves.is_empty());
        assert!((outs[0].probability_f64() - 1.0 / 3.0).abs() < 1e-16);
        assert_eq!(outs[1].leaves, LeafSet::new([1, 2]));
        assert!((outs[1].probability_f64() - 2.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn pure_partition_values() {
        assert_eq!(pure_log_partition(&spec(1.5, 7), 0.0).unwrap(), 0.0);
        assert_eq!(pure_log_partition(&spec(1.5, 0), 0.3).unwrap(), 0.3);
        let l = pure_log_partition(&spec(1.5, 1), 2f64.ln()).unwrap();
        assert!((l - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn pure_free_energy_cases() {
        let f = pure_free_energy(1.5, -0.2, 1e-10).unwrap();
        assert_eq!(f.value, 0.0);
        let f = pure_free_energy(1.5, 5.0, 1e-10).unwrap();
        assert!(f.bracket_width <= 1e-10);
        // log Z_n = 2^n (u - log B) + log B + O(e^{-2u})
        assert!((f.value - (5.0 - 1.5f64.ln())).abs() < 1e-4);
        assert!(f.lower <= f.value && f.value <= f.upper);
        assert!(pure_free_energy(1.5, 0.1, 0.0).is_err());
        assert!(pure_free_energy(2.5, 0.1, 1e-3).is_err());
    }

    #[test]
    fn relative_bracket_near_criticality() {
        let f = pure_free_energy_relative(1.8, 1e-6, 1e-6).unwrap();
        assert!(f.lower > 0.0 && f.bracket_width <= 1e-6 * f.lower);
        assert!(f.value < 1e-30);
        assert_eq!(pure_free_energy_relative(1.8, -1.0, 1e-6).unwrap().value, 0.0);
        assert!(pure_free_energy_relative(1.8, 0.1, 0.0).is_err());
    }

    #[test]
    fn exponent_values() {
        assert!((pure_exponent(2f64.sqrt()).unwrap() - 2.0).abs() < 1e-12);
        assert!((pure_exponent(4.0 / 3.0).unwrap() - 1.709_511_291_351_455).abs() < 1e-12);
        let near_one = pure_exponent(1.0001).unwrap();
        assert!(near_one > 1.0 && near_one < 1.001);
        assert!(pure_exponent(2.0).is_err());
    }

    #[test]
    fn contact_pmf_small() {
        let d = contact_distribution(&spec(1.5, 1)).unwrap();
        assert_eq!(d.pmf.len(), 3);
        assert!((d.pmf[0] - 1.0 / 3.0).abs() < 1e-16);
        assert_eq!(d.pmf[1], 0.0);
        assert!((d.pmf[2] - 2.0 / 3.0).abs() < 1e-16);
        let d3 = contact_distribution(&spec(1.5, 3)).unwrap();
        assert!((d3.mean() - (4.0f64 / 3.0).powi(3)).abs() < 1e-12);
        assert!(contact_distribution(&spec(1.5, 17)).is_err());
    }

    #[test]
    fn fixed_points_of_map() {
        for b in [1.1, 1.5, 1.9] {
            assert!((recursion_map(1.0, b) - 1.0).abs() < 1e-15);
            assert!((recursion_map(b - 1.0, b) - (b - 1.0)).abs() < 1e-15);
            let mut x = 0.5 * (b - 1.0 + 1.0);
            for _ in 0..2000 {
                let y = recursion_map(x, b);
                assert!(y <= x);
                x = y;
            }
            assert!((x - (b - 1.0)).abs() < 1e-9);
            let mut x = 1.0 + 1e-6;
            for _ in 0..2000 {
                x = recursion_map(x, b);
                if x > 1e6 {
                    break;
                }
            }
            assert!(x > 1e6);
        }
    }
}
