//! Multi-indices over the vertex set: ordered integer partitions, multinomial
//! coefficients, monomials and the coefficients of the martingale invariants.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::VertexSet;
use crate::simplex::SimplexPoint;

/// An ordered vector `a = (a_1, ..., a_r)` of non-negative integers.
///
/// Serializes as a JSON integer array.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartitionVector(Vec<u32>);

impl PartitionVector {
    pub fn new(counts: Vec<u32>) -> Self {
        PartitionVector(counts)
    }

    pub fn zeros(r: usize) -> Self {
        PartitionVector(vec![0; r])
    }

    /// The unit vector `e_i` (0-based `i`).
    pub fn unit(r: usize, i: usize) -> Self {
        let mut v = vec![0; r];
        v[i] = 1;
        PartitionVector(v)
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `|a| = sum a_i`.
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn support(&self) -> VertexSet {
        VertexSet::from_sorted_unchecked((0..self.0.len()).filter(|&i| self.0[i] > 0).collect())
    }

    /// True when every entry is 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.0.iter().all(|&c| c <= 1)
    }

    pub fn is_positive(&self) -> bool {
        self.0.iter().all(|&c| c >= 1)
    }

    /// `a - e_i + e_j`; the caller guarantees `a_i >= 1`.
    pub fn moved(&self, i: usize, j: usize) -> Self {
        let mut v = self.0.clone();
        v[i] -= 1;
        v[j] += 1;
        PartitionVector(v)
    }

    /// `a - e_i`; the caller guarantees `a_i >= 1`.
    pub fn erased(&self, i: usize) -> Self {
        let mut v = self.0.clone();
        v[i] -= 1;
        PartitionVector(v)
    }

    /// Embeds a vector indexed by the members of `set` into `r` coordinates.
    pub fn lift(&self, set: &VertexSet, r: usize) -> Self {
        let mut v = vec![0; r];
        for (k, &i) in set.members().iter().enumerate() {
            v[i] = self.0[k];
        }
        PartitionVector(v)
    }
}

impl From<Vec<u32>> for PartitionVector {
    fn from(v: Vec<u32>) -> Self {
        PartitionVector(v)
    }
}

impl std::ops::Index<usize> for PartitionVector {
    type Output = u32;

    fn index(&self, i: usize) -> &u32 {
        &self.0[i]
    }
}

impl fmt::Display for PartitionVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (k, c) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

/// Parses `1,0,2` (surrounding brackets or parentheses are ignored).
impl FromStr for PartitionVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_matches(|c| matches!(c, '(' | ')' | '[' | ']'));
        let counts = inner
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::InvalidParameter(format!("`{s}` is not a list of non-negative integers")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PartitionVector(counts))
    }
}

fn binomial_u128(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // exact at every step: acc * (n - i) is divisible by (i + 1)
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// `|Pi_{n,r}^{>=0}| = C(n+r-1, r-1)`, saturating at `u128::MAX`.
pub fn partition_count(n: u32, r: usize) -> u128 {
    if r == 0 {
        return u128::from(n == 0);
    }
    binomial_u128(n as u128 + r as u128 - 1, r as u128 - 1)
}

/// `|Pi_{n,r}| = C(n-1, r-1)`.
pub fn positive_partition_count(n: u32, r: usize) -> u128 {
    if n < r as u32 || r == 0 {
        return u128::from(n == 0 && r == 0);
    }
    binomial_u128(n as u128 - 1, r as u128 - 1)
}

/// All ordered partitions of `n` into `r` non-negative (or positive) parts.
///
/// The order is colexicographic: vectors are compared by their last entry
/// first, then the one before it, and so on.
pub fn enumerate_partitions(n: u32, r: usize, positive_only: bool) -> Result<Vec<PartitionVector>> {
    if r == 0 {
        return Err(Error::InvalidParameter("partitions need at least one part".into()));
    }
    if positive_only && (n as usize) < r {
        return Err(Error::EmptyDomain { n, r });
    }
    let min = u32::from(positive_only);
    let mut out = Vec::new();
    let mut buf = vec![0; r];
    fill_colex(r, n, min, &mut buf, &mut out);
    Ok(out)
}

fn fill_colex(len: usize, remaining: u32, min: u32, buf: &mut Vec<u32>, out: &mut Vec<PartitionVector>) {
    if len == 1 {
        if remaining >= min {
            buf[0] = remaining;
            out.push(PartitionVector(buf.clone()));
        }
        return;
    }
    let reserve = min * (len as u32 - 1);
    if remaining < reserve + min {
        return;
    }
    for last in min..=remaining - reserve {
        buf[len - 1] = last;
        fill_colex(len - 1, remaining - last, min, buf, out);
    }
}

/// `n! / prod a_i!` computed exactly.
pub fn multinomial(a: &PartitionVector) -> BigUint {
    let mut acc = BigUint::one();
    let mut running = 0u64;
    for &c in a.counts() {
        for k in 1..=c as u64 {
            running += 1;
            acc = acc * BigUint::from(running) / BigUint::from(k);
        }
    }
    acc
}

/// `prod x_i^{a_i}` with `0^0 = 1`.
pub fn evaluate_monomial(x: &SimplexPoint, a: &PartitionVector) -> Result<f64> {
    if x.dim() != a.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: x.dim(),
        });
    }
    Ok(monomial(x.coords(), a.counts()))
}

/// Unchecked monomial kernel; `powi(0)` is 1 even at 0.
pub(crate) fn monomial(x: &[f64], a: &[u32]) -> f64 {
    x.iter().zip(a).map(|(&xi, &ai)| xi.powi(ai as i32)).product()
}

/// Maps partitions of a fixed order to dense row indices.
#[derive(Debug, Clone)]
pub struct PartitionIndex {
    states: Vec<PartitionVector>,
    lookup: HashMap<PartitionVector, usize>,
}

impl PartitionIndex {
    pub fn new(states: Vec<PartitionVector>) -> Self {
        let lookup = states.iter().enumerate().map(|(k, a)| (a.clone(), k)).collect();
        PartitionIndex { states, lookup }
    }

    pub fn states(&self) -> &[PartitionVector] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn get(&self, a: &PartitionVector) -> Option<usize> {
        self.lookup.get(a).copied()
    }
}

/// Weights `c` on an independent set together with the order `n` of the
/// homogeneous polynomial they define.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantSpec {
    independent_set: VertexSet,
    weights: Vec<f64>,
    order: u32,
}

impl InvariantSpec {
    /// `weights[k]` belongs to the k-th smallest member of the set; the
    /// weights must sum to zero and `order >= |set| + 1`.
    pub fn new(independent_set: VertexSet, weights: Vec<f64>, order: u32) -> Result<Self> {
        if weights.len() != independent_set.len() {
            return Err(Error::DimensionMismatch {
                expected: independent_set.len(),
                found: weights.len(),
            });
        }
        if independent_set.is_empty() {
            return Err(Error::InvalidParameter("invariant needs a non-empty vertex set".into()));
        }
        let sum: f64 = weights.iter().sum();
        if sum.abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("invariant weights sum to {sum}, not 0")));
        }
        if (order as usize) < independent_set.len() + 1 {
            return Err(Error::InvalidParameter(format!(
                "invariant order {order} is below |V_I| + 1 = {}",
                independent_set.len() + 1
            )));
        }
        Ok(InvariantSpec {
            independent_set,
            weights,
            order,
        })
    }

    pub fn independent_set(&self) -> &VertexSet {
        &self.independent_set
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn order(&self) -> u32 {
        self.order
    }
}

/// Coefficients `f(n, a) = C(n-|V_I|; a-1) C(n; a) c^a` over the positive
/// partitions `a` of `n` indexed by the members of `V_I` (local coordinates,
/// colexicographic order).
pub fn invariant_coefficients(spec: &InvariantSpec) -> Vec<(PartitionVector, f64)> {
    let s = spec.independent_set.len();
    let parts = enumerate_partitions(spec.order, s, true).expect("order >= |V_I| + 1 checked at construction");
    parts
        .into_iter()
        .map(|a| {
            let shifted = PartitionVector(a.counts().iter().map(|c| c - 1).collect());
            let combinatorial = big_to_f64(&(multinomial(&shifted) * multinomial(&a)));
            let power: f64 = spec
                .weights
                .iter()
                .zip(a.counts())
                .map(|(c, &k)| c.powi(k as i32))
                .product();
            (a, combinatorial * power)
        })
        .collect()
}

pub(crate) fn big_to_f64(v: &BigUint) -> f64 {
    num_traits::ToPrimitive::to_f64(v).unwrap_or(f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pv(v: &[u32]) -> PartitionVector {
        PartitionVector::new(v.to_vec())
    }

    /// Oracle: every vector in {0..=n}^r with the right sum.
    fn brute_force(n: u32, r: usize, positive: bool) -> Vec<PartitionVector> {
        let mut out = Vec::new();
        let total = (n as usize + 1).pow(r as u32);
        for code in 0..total {
            let mut c = code;
            let mut v = vec![0u32; r];
            for slot in v.iter_mut() {
                *slot = (c % (n as usize + 1)) as u32;
                c /= n as usize + 1;
            }
            if v.iter().sum::<u32>() == n && (!positive || v.iter().all(|&x| x >= 1)) {
                out.push(PartitionVector(v));
            }
        }
        out
    }

    fn colex_key(a: &PartitionVector) -> Vec<u32> {
        a.counts().iter().rev().copied().collect()
    }

    #[test]
    fn small_enumerations() {
        let got = enumerate_partitions(4, 2, true).unwrap();
        let mut as_set = got.clone();
        as_set.sort();
        assert_eq!(as_set, vec![pv(&[1, 3]), pv(&[2, 2]), pv(&[3, 1])]);
        // colexicographic: last coordinate is the primary key
        assert_eq!(got, vec![pv(&[3, 1]), pv(&[2, 2]), pv(&[1, 3])]);
        assert_eq!(enumerate_partitions(0, 3, false).unwrap(), vec![pv(&[0, 0, 0])]);
        assert_eq!(enumerate_partitions(6, 4, true).unwrap().len(), 10);
        assert_eq!(
            enumerate_partitions(2, 3, true),
            Err(Error::EmptyDomain { n: 2, r: 3 })
        );
    }

    #[test]
    fn enumeration_matches_oracle() {
        for n in 0..=8 {
            for r in 1..=6 {
                let mut oracle = brute_force(n, r, false);
                oracle.sort_by_key(colex_key);
                let got = enumerate_partitions(n, r, false).unwrap();
                assert_eq!(got, oracle, "n={n} r={r}");
                assert_eq!(got.len() as u128, partition_count(n, r));
                if n as usize >= r {
                    let pos = enumerate_partitions(n, r, true).unwrap();
                    assert_eq!(pos.len() as u128, positive_partition_count(n, r));
                    assert!(pos.iter().all(PartitionVector::is_positive));
                }
            }
        }
    }

    #[test]
    fn multinomials() {
        assert_eq!(multinomial(&pv(&[1, 3])), BigUint::from(4u32));
        assert_eq!(multinomial(&pv(&[2, 2])), BigUint::from(6u32));
        assert_eq!(multinomial(&pv(&[1, 1, 1])), BigUint::from(6u32));
        assert_eq!(multinomial(&pv(&[0, 0])), BigUint::from(1u32));
        // 30! / (10!)^3
        assert_eq!(
            multinomial(&pv(&[10, 10, 10])).to_string(),
            "5550996791340"
        );
    }

    #[test]
    fn monomials() {
        let half = SimplexPoint::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(evaluate_monomial(&half, &pv(&[1, 1])).unwrap(), 0.25);
        let corner = SimplexPoint::vertex(3, 0);
        assert_eq!(evaluate_monomial(&corner, &pv(&[0, 1, 0])).unwrap(), 0.0);
        assert_eq!(evaluate_monomial(&corner, &pv(&[2, 0, 0])).unwrap(), 1.0);
        let x = SimplexPoint::new(vec![0.3, 0.7]).unwrap();
        assert_eq!(evaluate_monomial(&x, &pv(&[0, 0])).unwrap(), 1.0);
        assert!(matches!(
            evaluate_monomial(&x, &pv(&[1, 0, 0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn four_cycle_invariant_coefficients() {
        let spec = InvariantSpec::new(VertexSet::new(vec![1, 3]).unwrap(), vec![1.0, -1.0], 4).unwrap();
        let mut coeffs = invariant_coefficients(&spec);
        coeffs.sort_by(|a, b| a.0.cmp(&b.0));
        assert_eq!(
            coeffs,
            vec![(pv(&[1, 3]), -4.0), (pv(&[2, 2]), 12.0), (pv(&[3, 1]), -4.0)]
        );
    }

    #[test]
    fn star_invariant_coefficients() {
        // C(1; a-1) C(3; a) c^a: (1,2) -> 1*3*(+1), (2,1) -> 1*3*(-1)
        let spec = InvariantSpec::new(VertexSet::new(vec![1, 2]).unwrap(), vec![1.0, -1.0], 3).unwrap();
        let mut coeffs = invariant_coefficients(&spec);
        coeffs.sort_by(|a, b| a.0.cmp(&b.0));
        assert_eq!(coeffs, vec![(pv(&[1, 2]), 3.0), (pv(&[2, 1]), -3.0)]);
    }

    #[test]
    fn zero_weights_give_zero_coefficients() {
        let spec = InvariantSpec::new(VertexSet::new(vec![0, 2, 4]).unwrap(), vec![0.0; 3], 5).unwrap();
        assert!(invariant_coefficients(&spec).iter().all(|(_, c)| *c == 0.0));
    }

    #[test]
    fn invariant_spec_validation() {
        let set = VertexSet::new(vec![1, 3]).unwrap();
        assert!(InvariantSpec::new(set.clone(), vec![1.0, -0.5], 4).is_err());
        assert!(InvariantSpec::new(set.clone(), vec![1.0, -1.0], 2).is_err());
        assert!(InvariantSpec::new(set, vec![1.0], 4).is_err());
    }

    #[test]
    fn parse_and_display() {
        let a: PartitionVector = "1,0,1,0".parse().unwrap();
        assert_eq!(a, pv(&[1, 0, 1, 0]));
        assert_eq!("[2, 1]".parse::<PartitionVector>().unwrap(), pv(&[2, 1]));
        assert!("1,-1".parse::<PartitionVector>().is_err());
        assert_eq!(a.to_string(), "(1,0,1,0)");
        assert_eq!(serde_json::to_string(&a).unwrap(), "[1,0,1,0]");
    }

    proptest! {
        #[test]
        fn multinomial_theorem(weights in prop::collection::vec(0.01f64..1.0, 1..6), n in 0u32..7) {
            let x = SimplexPoint::normalized(weights).unwrap();
            let total: f64 = enumerate_partitions(n, x.dim(), false)
                .unwrap()
                .iter()
                .map(|a| big_to_f64(&multinomial(a)) * evaluate_monomial(&x, a).unwrap())
                .sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn coefficients_scale_by_power(
            c in prop::collection::vec(-2.0f64..2.0, 1..4),
            s in -3.0f64..3.0,
            extra in 1u32..4,
        ) {
            let mean = c.iter().sum::<f64>() / c.len() as f64;
            let mut centred: Vec<f64> = c.iter().map(|v| v - mean).collect();
            let fix: f64 = centred.iter().sum();
            centred[0] -= fix;
            let k = centred.len() + 1;
            let members: Vec<usize> = (0..k).step_by(1).map(|v| 2 * v).collect();
            // pad with one more weight so the set has k members summing to zero
            let mut weights = centred.clone();
            weights.push(0.0);
            let n = k as u32 + extra;
            let set = VertexSet::new(members).unwrap();
            let base = InvariantSpec::new(set.clone(), weights.clone(), n).unwrap();
            let scaled_w: Vec<f64> = weights.iter().map(|w| w * s).collect();
            let scaled = InvariantSpec::new(set, scaled_w, n).unwrap();
            let factor = s.powi(n as i32);
            for ((a, f), (b, g)) in invariant_coefficients(&base).iter().zip(invariant_coefficients(&scaled).iter()) {
                prop_assert_eq!(a, b);
                prop_assert!((g - f * factor).abs() <= 1e-9 * (1.0 + g.abs()));
            }
        }
    }
}
