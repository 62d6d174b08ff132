use std::collections::HashMap;
use std::sync::Mutex;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};

pub fn factorial(n: usize) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * BigUint::from(k))
}

pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= BigUint::from(n - i);
        acc /= BigUint::from(i + 1);
    }
    acc
}

/// `n! / (k_1! k_2! ...)` with `n = Σ k_j`.
pub fn multinomial(parts: &[usize]) -> BigUint {
    let mut total = 0;
    let mut acc = BigUint::one();
    for &p in parts {
        total += p;
        acc *= binomial(total, p);
    }
    acc
}

/// `!n` by the recurrence `!n = (n-1)(!(n-1) + !(n-2))`.
pub fn derangement_count(n: usize) -> BigUint {
    let mut prev2 = BigUint::one(); // !0
    if n == 0 {
        return prev2;
    }
    let mut prev1 = BigUint::zero(); // !1
    for k in 2..=n {
        let next = BigUint::from(k - 1) * (&prev1 + &prev2);
        prev2 = prev1;
        prev1 = next;
    }
    prev1
}

/// An exact non-negative rational, used for bounds that are not integers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Ratio {
    #[serde(serialize_with = "ser_big")]
    pub num: BigUint,
    #[serde(serialize_with = "ser_big")]
    pub den: BigUint,
}

fn ser_big<S: serde::Serializer>(v: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

impl Ratio {
    pub fn integer(v: BigUint) -> Self {
        Ratio { num: v, den: BigUint::one() }
    }

    pub fn le(&self, v: &BigUint) -> bool {
        self.num <= (v * &self.den)
    }

    pub fn ge(&self, v: &BigUint) -> bool {
        self.num >= (v * &self.den)
    }

    pub fn log2(&self) -> f64 {
        big_log2(&self.num) - big_log2(&self.den)
    }
}

/// `log2(v)`, `-inf` for zero; accurate for values beyond `f64` range.
pub fn big_log2(v: &BigUint) -> f64 {
    if v.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = v.bits();
    if bits <= 1000 {
        return v.to_f64().unwrap_or(f64::INFINITY).log2();
    }
    let shift = bits - 64;
    let top = (v >> shift).to_f64().unwrap_or(0.0);
    top.log2() + shift as f64
}

/// Exact count of permutations with `m` fixed points and the bracketing
/// bounds `n!/(m!(n-m)) <= N_m <= n^(n-m)`.
///
/// The lower bound is undefined at `m = n` (reported as 1) and fails at
/// `m = n - 1`, where no permutation exists but the formula gives `n`.
#[derive(Debug, Clone, Serialize)]
pub struct FixedPointCount {
    pub n: usize,
    pub m: usize,
    #[serde(serialize_with = "ser_big")]
    pub exact: BigUint,
    pub lower: Ratio,
    #[serde(serialize_with = "ser_big")]
    pub upper: BigUint,
}

impl FixedPointCount {
    pub fn lower_holds(&self) -> bool {
        self.lower.le(&self.exact)
    }

    pub fn upper_holds(&self) -> bool {
        self.exact <= self.upper
    }

    pub fn log2_bounds(&self) -> (f64, f64) {
        (self.lower.log2(), big_log2(&self.upper))
    }
}

pub fn count_fixed_point_perms(n: usize, m: usize) -> Result<FixedPointCount> {
    if m > n {
        return Err(Error::InvalidParameter(format!("m = {m} exceeds n = {n}")));
    }
    let exact = binomial(n, m) * derangement_count(n - m);
    let lower = if m == n {
        Ratio::integer(BigUint::one())
    } else {
        Ratio { num: factorial(n), den: factorial(m) * BigUint::from(n - m) }
    };
    let upper = BigUint::from(n).pow((n - m) as u32);
    Ok(FixedPointCount { n, m, exact, lower, upper })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CountBounds {
    #[serde(serialize_with = "ser_big")]
    pub lower: BigUint,
    #[serde(serialize_with = "ser_big")]
    pub upper: BigUint,
}

impl CountBounds {
    pub fn contains(&self, v: &BigUint) -> bool {
        &self.lower <= v && v <= &self.upper
    }
}

/// `((n-k+1)!)^(k-1) <= d_k(n) <= (!n)^(k-1)`.
pub fn k_fold_derangement_bounds(n: usize, k: usize) -> Result<CountBounds> {
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("need 1 <= k <= n, got k = {k}, n = {n}")));
    }
    let e = (k - 1) as u32;
    Ok(CountBounds { lower: factorial(n - k + 1).pow(e), upper: derangement_count(n).pow(e) })
}

static KFOLD_CACHE: Mutex<Option<HashMap<(usize, usize), BigUint>>> = Mutex::new(None);

/// Exact number of k-fold derangements of `[0, n)`: tuples
/// `(id, π_2, ..., π_k)` whose values at every index are pairwise distinct.
///
/// Counted by backtracking; refuses instances above ~10^9 leaves.
pub fn k_fold_derangement_count(n: usize, k: usize) -> Result<BigUint> {
    if k <= 1 || n == 0 {
        return Ok(BigUint::one());
    }
    if k > n {
        return Ok(BigUint::zero());
    }
    let work = big_log2(&derangement_count(n)) * (k - 1) as f64;
    if work > 30.0 {
        return Err(Error::TooLarge(format!("k-fold derangement count for n = {n}, k = {k}")));
    }
    if let Some(v) = KFOLD_CACHE.lock().unwrap().as_ref().and_then(|c| c.get(&(n, k))) {
        return Ok(v.clone());
    }
    // rows[l][i] = π_l(i); row 0 is the identity
    let mut rows = vec![vec![usize::MAX; n]; k];
    rows[0] = (0..n).collect();
    let mut used = vec![vec![false; n]; k];
    let count = fill_rows(&mut rows, &mut used, 1, 0, n, k);
    let v = BigUint::from(count);
    KFOLD_CACHE.lock().unwrap().get_or_insert_with(HashMap::new).insert((n, k), v.clone());
    Ok(v)
}

fn fill_rows(rows: &mut [Vec<usize>], used: &mut [Vec<bool>], row: usize, col: usize, n: usize, k: usize) -> u64 {
    if row == k {
        return 1;
    }
    if col == n {
        return fill_rows(rows, used, row + 1, 0, n, k);
    }
    let mut total = 0;
    for v in 0..n {
        if used[row][v] || (0..row).any(|r| rows[r][col] == v) {
            continue;
        }
        used[row][v] = true;
        rows[row][col] = v;
        total += fill_rows(rows, used, row, col + 1, n, k);
        used[row][v] = false;
    }
    rows[row][col] = usize::MAX;
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::Permutations;

    fn brute_fixed_counts(n: usize) -> Vec<u64> {
        let mut counts = vec![0u64; n + 1];
        for p in Permutations::new(n) {
            counts[p.fixed_points()] += 1;
        }
        counts
    }

    #[test]
    fn small_derangements() {
        assert_eq!(derangement_count(0), BigUint::from(1u32));
        assert_eq!(derangement_count(1), BigUint::from(0u32));
        assert_eq!(derangement_count(4), BigUint::from(9u32));
        for n in 0..=7 {
            let brute = brute_fixed_counts(n)[0];
            assert_eq!(derangement_count(n), BigUint::from(brute), "n = {n}");
        }
    }

    #[test]
    fn fixed_point_counts_match_enumeration() {
        assert_eq!(count_fixed_point_perms(4, 1).unwrap().exact, BigUint::from(8u32));
        assert_eq!(count_fixed_point_perms(5, 2).unwrap().exact, BigUint::from(20u32));
        assert_eq!(count_fixed_point_perms(6, 6).unwrap().exact, BigUint::from(1u32));
        for n in 1..=7 {
            let brute = brute_fixed_counts(n);
            let mut sum = BigUint::zero();
            for (m, &b) in brute.iter().enumerate() {
                let c = count_fixed_point_perms(n, m).unwrap();
                assert_eq!(c.exact, BigUint::from(b));
                sum += &c.exact;
            }
            assert_eq!(sum, factorial(n));
        }
    }

    #[test]
    fn fixed_point_bounds_hold_except_one_short() {
        for n in 1..=7 {
            for m in 0..=n {
                let c = count_fixed_point_perms(n, m).unwrap();
                assert!(c.upper_holds(), "upper n={n} m={m}");
                if m + 1 == n {
                    // N_{n-1} = 0 while the lower formula gives n.
                    assert!(!c.lower_holds());
                } else {
                    assert!(c.lower_holds(), "lower n={n} m={m}");
                }
            }
        }
    }

    #[test]
    fn k_fold_small_values() {
        assert_eq!(k_fold_derangement_count(5, 2).unwrap(), derangement_count(5));
        assert_eq!(k_fold_derangement_count(3, 3).unwrap(), BigUint::from(2u32));
        assert_eq!(k_fold_derangement_count(2, 3).unwrap(), BigUint::zero());
        assert_eq!(k_fold_derangement_count(0, 3).unwrap(), BigUint::one());
        let b = k_fold_derangement_bounds(4, 3).unwrap();
        assert_eq!(b.lower, BigUint::from(4u32));
        assert_eq!(b.upper, BigUint::from(81u32));
        assert!(b.contains(&k_fold_derangement_count(4, 3).unwrap()));
    }

    #[test]
    fn k_fold_matches_pair_enumeration() {
        // d_3(4) by direct enumeration of (π_2, π_3) over S_4 x S_4
        let perms: Vec<_> = Permutations::new(4).collect();
        let mut count = 0u32;
        for a in &perms {
            for b in &perms {
                if (0..4).all(|i| a.apply(i) != i && b.apply(i) != i && a.apply(i) != b.apply(i)) {
                    count += 1;
                }
            }
        }
        assert_eq!(k_fold_derangement_count(4, 3).unwrap(), BigUint::from(count));
    }

    #[test]
    fn big_log2_large() {
        let v = BigUint::one() << 2000u32;
        assert!((big_log2(&v) - 2000.0).abs() < 1e-9);
        assert!((big_log2(&factorial(10)) - (3628800f64).log2()).abs() < 1e-12);
    }
}
