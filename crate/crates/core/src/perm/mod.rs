//! Permutations of `[0, n)`, their cycle structure, and the combinatorial
//! counts used by the error analysis of typicality matching.
//!
//! Convention: a [`Permutation`] stores the image `π(i)` of every index.
//! Acting on a sequence, the symbol at position `i` moves to position
//! `π(i)`, so `z[π(i)] = y[i]`. With this convention the cycle `(1 2 3)`
//! sends `(a1, a2, a3)` to `(a3, a1, a2)`.

mod bell;
mod counting;

pub use bell::{bell_count_bounds, bell_signature, set_partitions, BellSignature, SetPartition};
pub use counting::{
    big_log2, binomial, count_fixed_point_perms, derangement_count, factorial, k_fold_derangement_bounds,
    k_fold_derangement_count, multinomial, CountBounds, FixedPointCount, Ratio,
};

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A bijection on `[0, n)`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    images: Vec<usize>,
}

/// Vertex labelings are bijections `vertex -> label`.
pub type Labeling = Permutation;

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Permutation{:?}", self.images)
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;
    fn try_from(images: Vec<usize>) -> Result<Self> {
        Permutation::from_images(images)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Vec<usize> {
        p.images
    }
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation { images: (0..n).collect() }
    }

    /// Builds `π` from the list `[π(0), π(1), ...]`.
    pub fn from_images(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &v in &images {
            if v >= n {
                return Err(Error::NotBijection { n, reason: format!("value {v} out of range") });
            }
            if seen[v] {
                return Err(Error::NotBijection { n, reason: format!("value {v} repeated") });
            }
            seen[v] = true;
        }
        Ok(Permutation { images })
    }

    /// Builds the permutation whose action sends `(0, 1, ..., n-1)` to `seq`.
    ///
    /// `seq[i]` is the element that lands at position `i`, i.e. `π⁻¹(i)`.
    pub fn from_action(seq: &[usize]) -> Result<Self> {
        Ok(Permutation::from_images(seq.to_vec())?.inverse())
    }

    /// Builds a permutation of `[0, n)` from disjoint cycles; each cycle
    /// `(a b c)` maps `a -> b -> c -> a`. Unlisted points are fixed.
    pub fn from_cycles(n: usize, cycles: &[Vec<usize>]) -> Result<Self> {
        let mut images: Vec<usize> = (0..n).collect();
        let mut used = vec![false; n];
        for cycle in cycles {
            for (pos, &a) in cycle.iter().enumerate() {
                if a >= n {
                    return Err(Error::NotBijection { n, reason: format!("cycle entry {a} out of range") });
                }
                if used[a] {
                    return Err(Error::NotBijection { n, reason: format!("cycles not disjoint at {a}") });
                }
                used[a] = true;
                images[a] = cycle[(pos + 1) % cycle.len()];
            }
        }
        Ok(Permutation { images })
    }

    /// Uniformly random permutation (Fisher-Yates).
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut images: Vec<usize> = (0..n).collect();
        images.shuffle(rng);
        Permutation { images }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.images[i]
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.images.len()];
        for (i, &v) in self.images.iter().enumerate() {
            inv[v] = i;
        }
        Permutation { images: inv }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Permutation) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch { expected: self.len(), got: other.len() });
        }
        Ok(Permutation { images: other.images.iter().map(|&i| self.images[i]).collect() })
    }

    /// Moves the element at position `i` to position `π(i)`.
    pub fn apply_to_sequence<T: Clone>(&self, seq: &[T]) -> Result<Vec<T>> {
        if seq.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), got: seq.len() });
        }
        let mut out = seq.to_vec();
        for (i, item) in seq.iter().enumerate() {
            out[self.images[i]] = item.clone();
        }
        Ok(out)
    }

    pub fn fixed_points(&self) -> usize {
        self.images.iter().enumerate().filter(|&(i, &v)| i == v).count()
    }

    /// Disjoint non-trivial cycles, each starting at its smallest element,
    /// ordered by that element.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] || self.images[start] == start {
                seen[start] = true;
                continue;
            }
            let mut cycle = vec![start];
            seen[start] = true;
            let mut cur = self.images[start];
            while cur != start {
                seen[cur] = true;
                cycle.push(cur);
                cur = self.images[cur];
            }
            out.push(cycle);
        }
        out
    }

    pub fn cycle_signature(&self) -> CycleSignature {
        let mut lengths: Vec<usize> = self.cycles().iter().map(Vec::len).collect();
        lengths.sort_unstable();
        CycleSignature { n: self.len(), fixed: self.fixed_points(), lengths }
    }
}

/// The `(m, c, i_1, ..., i_c)` parameters of a permutation: `m` fixed
/// points and `c` non-trivial cycles of the listed lengths.
///
/// Lengths are kept in the order given; [`CycleSignature::canonical`]
/// sorts them. The standard permutation lays cycles out in the stored order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CycleSignature {
    pub n: usize,
    pub fixed: usize,
    pub lengths: Vec<usize>,
}

impl CycleSignature {
    pub fn new(fixed: usize, lengths: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = lengths.iter().find(|&&l| l < 2) {
            return Err(Error::InvalidSignature(format!("cycle length {bad} < 2")));
        }
        let n = fixed + lengths.iter().sum::<usize>();
        Ok(CycleSignature { n, fixed, lengths })
    }

    pub fn cycle_count(&self) -> usize {
        self.lengths.len()
    }

    pub fn canonical(&self) -> Self {
        let mut lengths = self.lengths.clone();
        lengths.sort_unstable();
        CycleSignature { n: self.n, fixed: self.fixed, lengths }
    }

    /// Fraction of fixed points, `m / n`.
    pub fn alpha(&self) -> f64 {
        if self.n == 0 {
            1.0
        } else {
            self.fixed as f64 / self.n as f64
        }
    }

    fn validate(&self) -> Result<()> {
        if self.lengths.iter().any(|&l| l < 2) {
            return Err(Error::InvalidSignature("cycle length < 2".into()));
        }
        if self.fixed + self.lengths.iter().sum::<usize>() != self.n {
            return Err(Error::InvalidSignature(format!(
                "fixed points plus cycle lengths do not sum to n = {}",
                self.n
            )));
        }
        Ok(())
    }
}

/// All canonical signatures of permutations of `[0, n)`: one per integer
/// partition of the non-fixed part into parts of size at least 2.
pub fn all_signatures(n: usize) -> Vec<CycleSignature> {
    fn parts(rem: usize, min: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rem == 0 {
            out.push(cur.clone());
            return;
        }
        for p in min..=rem {
            cur.push(p);
            parts(rem - p, p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for moved in 0..=n {
        let mut ls = Vec::new();
        parts(moved, 2, &mut Vec::new(), &mut ls);
        for lengths in ls {
            out.push(CycleSignature { n, fixed: n - moved, lengths });
        }
    }
    out
}

/// Decomposes `π` into its signature and explicit cycles.
pub fn cycle_decompose(pi: &Permutation) -> (CycleSignature, Vec<Vec<usize>>) {
    (pi.cycle_signature(), pi.cycles())
}

/// The standard permutation of a signature: consecutive blocks
/// `(0 .. i_1-1)(i_1 .. i_1+i_2-1)...`, with the `m` fixed points last.
pub fn standard_permutation(sig: &CycleSignature) -> Result<Permutation> {
    sig.validate()?;
    let mut images: Vec<usize> = (0..sig.n).collect();
    let mut start = 0;
    for &len in &sig.lengths {
        for k in 0..len {
            images[start + k] = start + (k + 1) % len;
        }
        start += len;
    }
    Ok(Permutation { images })
}

/// Row-major index of the unordered pair `{i, j}`, `i != j`, among the
/// `n(n-1)/2` upper-triangle positions.
#[inline]
pub fn ut_index(n: usize, i: usize, j: usize) -> usize {
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    a * n - a * (a + 1) / 2 + (b - a - 1)
}

/// Inverse of [`ut_index`].
pub fn ut_pair(n: usize, idx: usize) -> (usize, usize) {
    let mut a = 0;
    let mut base = 0;
    loop {
        let row = n - a - 1;
        if idx < base + row {
            return (a, a + 1 + (idx - base));
        }
        base += row;
        a += 1;
    }
}

/// The permutation of upper-triangle positions induced by relabeling
/// vertices with `π`: position `{i, j}` moves to `{π(i), π(j)}`.
///
/// A position is fixed when both endpoints are fixed or when `π` swaps the
/// two endpoints, so the fixed-position count is `C(i, 2) + t`, with `i`
/// fixed vertices and `t` two-cycles.
pub fn induced_edge_permutation(pi: &Permutation) -> Permutation {
    let n = pi.len();
    let len = n * n.saturating_sub(1) / 2;
    let mut images = vec![0; len];
    for i in 0..n {
        for j in i + 1..n {
            images[ut_index(n, i, j)] = ut_index(n, pi.apply(i), pi.apply(j));
        }
    }
    Permutation { images }
}

/// Iterates `S_n` in lexicographic order of the image vector.
pub struct Permutations {
    cur: Option<Vec<usize>>,
}

impl Permutations {
    pub fn new(n: usize) -> Self {
        Permutations { cur: Some((0..n).collect()) }
    }
}

impl Iterator for Permutations {
    type Item = Permutation;

    fn next(&mut self) -> Option<Permutation> {
        let cur = self.cur.as_mut()?;
        let out = Permutation { images: cur.clone() };
        if !next_lex(cur) {
            self.cur = None;
        }
        Some(out)
    }
}

/// Advances to the next permutation in lexicographic order; false at the last.
pub fn next_lex(v: &mut [usize]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_based(v: &[usize]) -> Vec<usize> {
        v.iter().map(|x| x - 1).collect()
    }

    #[test]
    fn worked_decomposition_example() {
        // (1,2,3,4,5) -> (5,1,4,3,2) is (1 2 5)(3 4).
        let pi = Permutation::from_action(&one_based(&[5, 1, 4, 3, 2])).unwrap();
        let (sig, cycles) = cycle_decompose(&pi);
        assert_eq!(cycles, vec![vec![0, 1, 4], vec![2, 3]]);
        assert_eq!(sig, CycleSignature { n: 5, fixed: 0, lengths: vec![2, 3] });
        let rebuilt = Permutation::from_cycles(5, &cycles).unwrap();
        assert_eq!(rebuilt, pi);
    }

    #[test]
    fn identity_signature() {
        let sig = Permutation::identity(6).cycle_signature();
        assert_eq!(sig.fixed, 6);
        assert_eq!(sig.cycle_count(), 0);
    }

    #[test]
    fn s4_round_trip() {
        let mut count = 0;
        for pi in Permutations::new(4) {
            let cycles = pi.cycles();
            assert_eq!(Permutation::from_cycles(4, &cycles).unwrap(), pi);
            count += 1;
        }
        assert_eq!(count, 24);
    }

    #[test]
    fn standard_permutation_example() {
        // (2,2,3,2)-standard permutation = (123)(45)(6)(7).
        let sig = CycleSignature::new(2, vec![3, 2]).unwrap();
        let pi = standard_permutation(&sig).unwrap();
        let alpha = ["a1", "a2", "a3", "a4", "a5", "a6", "a7"];
        let out = pi.apply_to_sequence(&alpha).unwrap();
        assert_eq!(out, vec!["a3", "a1", "a2", "a5", "a4", "a6", "a7"]);
    }

    #[test]
    fn standard_of_all_fixed_is_identity() {
        let sig = CycleSignature::new(5, vec![]).unwrap();
        assert_eq!(standard_permutation(&sig).unwrap(), Permutation::identity(5));
    }

    #[test]
    fn standard_round_trip_exhaustive() {
        for n in 0..=7 {
            for sig in all_signatures(n) {
                let pi = standard_permutation(&sig).unwrap();
                assert_eq!(pi.cycle_signature(), sig.canonical());
            }
        }
    }

    #[test]
    fn signature_rejects_short_cycles() {
        assert!(CycleSignature::new(1, vec![1, 2]).is_err());
        let bad = CycleSignature { n: 9, fixed: 1, lengths: vec![2] };
        assert!(standard_permutation(&bad).is_err());
    }

    #[test]
    fn from_images_rejects_non_bijection() {
        assert!(Permutation::from_images(vec![0, 0, 1]).is_err());
        assert!(Permutation::from_images(vec![0, 3, 1]).is_err());
    }

    #[test]
    fn inverse_has_same_signature() {
        for pi in Permutations::new(5) {
            assert_eq!(pi.cycle_signature(), pi.inverse().cycle_signature());
            assert_eq!(pi.compose(&pi.inverse()).unwrap(), Permutation::identity(5));
        }
    }

    #[test]
    fn signature_count_matches_partitions() {
        // Every permutation of S_6 falls in exactly one of the enumerated classes.
        let sigs = all_signatures(6);
        for pi in Permutations::new(6) {
            let s = pi.cycle_signature();
            assert_eq!(sigs.iter().filter(|&t| *t == s).count(), 1);
        }
    }

    #[test]
    fn ut_index_is_row_major() {
        let n = 4;
        let order: Vec<(usize, usize)> = (0..6).map(|k| ut_pair(n, k)).collect();
        assert_eq!(order, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        for (k, &(i, j)) in order.iter().enumerate() {
            assert_eq!(ut_index(n, i, j), k);
            assert_eq!(ut_index(n, j, i), k);
        }
    }

    #[test]
    fn induced_identity() {
        let e = induced_edge_permutation(&Permutation::identity(5));
        assert_eq!(e, Permutation::identity(10));
    }

    #[test]
    fn induced_transposition_n4() {
        // Swapping vertices 0 and 1 fixes {2,3} and the swapped pair {0,1}.
        let pi = Permutation::from_cycles(4, &[vec![0, 1]]).unwrap();
        let e = induced_edge_permutation(&pi);
        assert_eq!(e.fixed_points(), 2);
        let fixed: Vec<_> = (0..6).filter(|&k| e.apply(k) == k).map(|k| ut_pair(4, k)).collect();
        assert_eq!(fixed, vec![(0, 1), (2, 3)]);
    }

    #[test]
    fn induced_fixed_point_law_s5() {
        for pi in Permutations::new(5) {
            let i = pi.fixed_points();
            let two_cycles = pi.cycles().iter().filter(|c| c.len() == 2).count();
            let e = induced_edge_permutation(&pi);
            assert_eq!(e.fixed_points(), i * i.saturating_sub(1) / 2 + two_cycles);
            if two_cycles == 0 {
                assert_eq!(e.fixed_points(), i * i.saturating_sub(1) / 2);
            }
        }
    }
}
