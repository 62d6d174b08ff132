//! Set partitions of `[0, k)` and Bell classification of permutation tuples.
//!
//! Partitions are enumerated in a fixed order: by number of blocks,
//! descending, then by restricted-growth string. For `k = 3` this gives
//! `{0}{1}{2}, {0,1}{2}, {0,2}{1}, {0}{1,2}, {0,1,2}`: the all-singletons
//! partition comes first and the single-set partition is always last.

use num_bigint::BigUint;
use num_traits::One;
use serde::Serialize;

use super::counting::{k_fold_derangement_count, multinomial, CountBounds};
use super::Permutation;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SetPartition {
    /// Block id of each element; block ids appear in first-occurrence order.
    pub rgs: Vec<usize>,
}

impl SetPartition {
    pub fn from_rgs(rgs: Vec<usize>) -> Self {
        SetPartition { rgs }
    }

    /// Canonicalises an arbitrary block labeling of `[0, k)`.
    pub fn from_labels<T: PartialEq>(labels: &[T]) -> Self {
        let mut rgs = Vec::with_capacity(labels.len());
        let mut reps: Vec<usize> = Vec::new();
        for (i, l) in labels.iter().enumerate() {
            match reps.iter().position(|&r| labels[r] == *l) {
                Some(b) => rgs.push(b),
                None => {
                    rgs.push(reps.len());
                    reps.push(i);
                }
            }
        }
        SetPartition { rgs }
    }

    pub fn k(&self) -> usize {
        self.rgs.len()
    }

    pub fn block_count(&self) -> usize {
        self.rgs.iter().max().map_or(0, |m| m + 1)
    }

    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.block_count()];
        for (i, &b) in self.rgs.iter().enumerate() {
            out[b].push(i);
        }
        out
    }

    /// Common refinement: elements share a block iff they do in both.
    pub fn meet(&self, other: &SetPartition) -> SetPartition {
        let pairs: Vec<(usize, usize)> = self.rgs.iter().copied().zip(other.rgs.iter().copied()).collect();
        SetPartition::from_labels(&pairs)
    }
}

impl std::fmt::Display for SetPartition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in self.blocks() {
            let inner: Vec<String> = b.iter().map(|x| (x + 1).to_string()).collect();
            write!(f, "{{{}}}", inner.join(","))?;
        }
        Ok(())
    }
}

/// All `b_k` partitions of `[0, k)` in the canonical order.
pub fn set_partitions(k: usize) -> Vec<SetPartition> {
    fn rec(pos: usize, k: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pos == k {
            out.push(cur.clone());
            return;
        }
        for b in 0..=max + 1 {
            cur.push(b);
            rec(pos + 1, k, max.max(b), cur, out);
            cur.pop();
        }
    }
    let mut all = Vec::new();
    if k == 0 {
        return vec![SetPartition { rgs: vec![] }];
    }
    let mut cur = vec![0];
    rec(1, k, 0, &mut cur, &mut all);
    let mut parts: Vec<SetPartition> = all.into_iter().map(SetPartition::from_rgs).collect();
    parts.sort_by(|a, b| b.block_count().cmp(&a.block_count()).then_with(|| a.rgs.cmp(&b.rgs)));
    parts
}

/// Counts of indices per partition class for a tuple of `k` permutations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BellSignature {
    pub k: usize,
    pub n: usize,
    /// `counts[j]` indices correspond to partition `j` of [`set_partitions`].
    pub counts: Vec<usize>,
}

impl BellSignature {
    pub fn new(k: usize, counts: Vec<usize>) -> Result<Self> {
        let b = set_partitions(k).len();
        if counts.len() != b {
            return Err(Error::LengthMismatch { expected: b, got: counts.len() });
        }
        Ok(BellSignature { k, n: counts.iter().sum(), counts })
    }

    /// Fraction of indices per class.
    pub fn weights(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.n as f64).collect()
    }
}

/// Classifies every index `i` by which preimages `π_l⁻¹(i)` coincide.
pub fn bell_signature(perms: &[Permutation]) -> Result<BellSignature> {
    let k = perms.len();
    if k == 0 {
        return Err(Error::InvalidParameter("need at least one permutation".into()));
    }
    let n = perms[0].len();
    if let Some(p) = perms.iter().find(|p| p.len() != n) {
        return Err(Error::LengthMismatch { expected: n, got: p.len() });
    }
    let parts = set_partitions(k);
    let inverses: Vec<Permutation> = perms.iter().map(Permutation::inverse).collect();
    let mut counts = vec![0; parts.len()];
    for i in 0..n {
        let pre: Vec<usize> = inverses.iter().map(|q| q.apply(i)).collect();
        let p = SetPartition::from_labels(&pre);
        let j = parts.iter().position(|q| *q == p).expect("every partition is enumerated");
        counts[j] += 1;
    }
    Ok(BellSignature { k, n, counts })
}

/// Bounds on the number of Bell permutation vectors `(id, π_2, ..., π_k)`
/// with the given signature:
/// `multinomial · Π d_{|P_j|}(i_j)` below and `multinomial · n^(Σ|P_j| i_j - n)` above.
pub fn bell_count_bounds(n: usize, sig: &BellSignature) -> Result<CountBounds> {
    if sig.n != n {
        return Err(Error::LengthMismatch { expected: n, got: sig.n });
    }
    let parts = set_partitions(sig.k);
    let multi = multinomial(&sig.counts);
    let mut lower = multi.clone();
    let mut exponent = 0usize;
    for (p, &c) in parts.iter().zip(&sig.counts) {
        lower *= k_fold_derangement_count(c, p.block_count())?;
        exponent += p.block_count() * c;
    }
    let upper = if n == 0 { BigUint::one() } else { multi * BigUint::from(n).pow((exponent - n) as u32) };
    Ok(CountBounds { lower, upper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::{derangement_count, Permutations};
    use std::collections::HashMap;

    #[test]
    fn bell_numbers() {
        let b: Vec<usize> = (0..=5).map(|k| set_partitions(k).len()).collect();
        assert_eq!(b, vec![1, 1, 2, 5, 15, 52]);
    }

    #[test]
    fn order_for_three() {
        let names: Vec<String> = set_partitions(3).iter().map(|p| p.to_string()).collect();
        assert_eq!(names, vec!["{1}{2}{3}", "{1,2}{3}", "{1,3}{2}", "{1}{2,3}", "{1,2,3}"]);
        for k in 1..=5 {
            assert_eq!(set_partitions(k).last().unwrap().block_count(), 1);
            assert_eq!(set_partitions(k)[0].block_count(), k);
        }
    }

    #[test]
    fn worked_example_signature() {
        let id = Permutation::identity(7);
        let p2 = Permutation::from_cycles(7, &[vec![0, 2, 4], vec![1, 3]]).unwrap();
        let p3 = Permutation::from_cycles(7, &[vec![0, 4], vec![1, 3], vec![2, 6]]).unwrap();
        // their actions on (1..7) as listed with the example
        assert_eq!(p2.inverse().images(), &[4, 3, 0, 1, 2, 5, 6]);
        assert_eq!(p3.inverse().images(), &[4, 3, 6, 1, 0, 5, 2]);
        let sig = bell_signature(&[id, p2, p3]).unwrap();
        assert_eq!(sig.counts, vec![2, 1, 0, 3, 1]);
    }

    #[test]
    fn identical_perms_use_single_set() {
        let p = Permutation::from_cycles(6, &[vec![0, 5, 2]]).unwrap();
        let sig = bell_signature(&[p.clone(), p.clone(), p]).unwrap();
        assert_eq!(sig.counts, vec![0, 0, 0, 0, 6]);
    }

    #[test]
    fn pair_signature_counts_fixed_points() {
        for p in Permutations::new(5) {
            let sig = bell_signature(&[Permutation::identity(5), p.clone()]).unwrap();
            assert_eq!(sig.counts, vec![5 - p.fixed_points(), p.fixed_points()]);
        }
    }

    #[test]
    fn meet_table() {
        let parts = set_partitions(3);
        // {1,2}{3} meet {1}{2,3} = singletons
        assert_eq!(parts[1].meet(&parts[3]), parts[0]);
        // anything meet single-set = itself
        for p in &parts {
            assert_eq!(p.meet(&parts[4]), *p);
        }
    }

    #[test]
    fn bell_bounds_bracket_derangements_for_pairs() {
        for n in 1..=7 {
            let sig = BellSignature::new(2, vec![n, 0]).unwrap();
            let b = bell_count_bounds(n, &sig).unwrap();
            assert!(b.contains(&derangement_count(n)));
        }
        let sig = BellSignature::new(3, vec![0, 0, 0, 0, 4]).unwrap();
        let b = bell_count_bounds(4, &sig).unwrap();
        assert!(b.contains(&BigUint::one()));
    }

    #[test]
    fn bell_bounds_bracket_brute_force_n4() {
        let n = 4;
        let perms: Vec<_> = Permutations::new(n).collect();
        let id = Permutation::identity(n);
        let mut counts: HashMap<Vec<usize>, u64> = HashMap::new();
        for a in &perms {
            for b in &perms {
                let s = bell_signature(&[id.clone(), a.clone(), b.clone()]).unwrap();
                *counts.entry(s.counts).or_default() += 1;
            }
        }
        for (c, v) in counts {
            let sig = BellSignature::new(3, c).unwrap();
            assert!(bell_count_bounds(n, &sig).unwrap().contains(&BigUint::from(v)), "{sig:?}");
        }
    }
}
