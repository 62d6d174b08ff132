//! Exact and Monte-Carlo probabilities that permuted i.i.d. pairs look
//! jointly typical, and the exact type-probability inequality.

use num_bigint::BigUint;
use rand::distributions::{Distribution, WeightedIndex};
use rayon::prelude::*;
use serde::Serialize;

use super::{JointDistribution, TypeVector, TypicalBox};
use crate::error::{Error, Result};
use crate::perm::{big_log2, multinomial, Permutation};
use crate::rng::substream;

/// Enumeration guard on `(|X||Y|)^n`.
pub const EXACT_STATE_LIMIT: f64 = (1u64 << 26) as f64;

/// Neumaier-compensated running sum.
#[derive(Default)]
struct CompensatedSum {
    sum: f64,
    c: f64,
}

impl CompensatedSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.c += (self.sum - t) + v;
        } else {
            self.c += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.c
    }
}

/// `P((π_x(Xⁿ), π_y(Yⁿ)) typical)` by enumerating every sequence pair.
pub fn typicality_prob_exact_pair(
    p: &JointDistribution,
    pi_x: &Permutation,
    pi_y: &Permutation,
    eps: f64,
) -> Result<f64> {
    if p.arity() != 2 {
        return Err(Error::InvalidDistribution("expected arity 2".into()));
    }
    let n = pi_x.len();
    if pi_y.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: pi_y.len() });
    }
    let cells = p.size();
    if (cells as f64).powi(n as i32) > EXACT_STATE_LIMIT {
        return Err(Error::TooLarge(format!("{cells}^{n} sequence pairs")));
    }
    let ly = p.alphabets()[1];
    // position i of the permuted sequences reads x at src_x[i] and y at src_y[i]
    let src_x = pi_x.inverse();
    let src_y = pi_y.inverse();
    let bx = TypicalBox::new(p, eps, n);
    let support: Vec<usize> = (0..cells).filter(|&c| p.pmf()[c] > 0.0).collect();
    if n == 0 || support.is_empty() {
        return Ok(if bx.contains(&vec![0; cells]) { 1.0 } else { 0.0 });
    }
    let mut digits = vec![0usize; n];
    let mut sum = CompensatedSum::default();
    let mut counts = vec![0u64; cells];
    loop {
        let prob: f64 = digits.iter().map(|&d| p.pmf()[support[d]]).product();
        counts.iter_mut().for_each(|c| *c = 0);
        for i in 0..n {
            let x = support[digits[src_x.apply(i)]] / ly;
            let y = support[digits[src_y.apply(i)]] % ly;
            counts[x * ly + y] += 1;
        }
        if bx.contains(&counts) {
            sum.add(prob);
        }
        let mut pos = 0;
        loop {
            if pos == n {
                return Ok(sum.total());
            }
            digits[pos] += 1;
            if digits[pos] < support.len() {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}

/// `P((Xⁿ, π(Yⁿ)) typical)`, exactly.
pub fn typicality_prob_exact(p: &JointDistribution, pi: &Permutation, eps: f64) -> Result<f64> {
    typicality_prob_exact_pair(p, &Permutation::identity(pi.len()), pi, eps)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub trials: usize,
}

/// Monte-Carlo estimate of `P((Xⁿ, π(Yⁿ)) typical)`; trial `t` draws from
/// its own keyed stream so the result is independent of scheduling.
pub fn typicality_prob_mc(
    p: &JointDistribution,
    pi: &Permutation,
    eps: f64,
    trials: usize,
    seed: u64,
) -> Result<McEstimate> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    if p.arity() != 2 {
        return Err(Error::InvalidDistribution("expected arity 2".into()));
    }
    let n = pi.len();
    let ly = p.alphabets()[1];
    let sampler = WeightedIndex::new(p.pmf()).map_err(|e| Error::InvalidDistribution(e.to_string()))?;
    let src = pi.inverse();
    let bx = TypicalBox::new(p, eps, n);
    let hits: usize = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(seed, "typicality-mc", t as u64);
            let cells: Vec<usize> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
            let mut counts = vec![0u64; p.size()];
            for i in 0..n {
                let x = cells[i] / ly;
                let y = cells[src.apply(i)] % ly;
                counts[x * ly + y] += 1;
            }
            usize::from(bx.contains(&counts))
        })
        .sum();
    let est = hits as f64 / trials as f64;
    Ok(McEstimate { estimate: est, stderr: (est * (1.0 - est) / trials as f64).sqrt(), trials })
}

#[derive(Debug, Clone, Serialize)]
pub struct TypeBoundCheck {
    pub holds: bool,
    /// `log2 P(type = t)`; `-inf` when `t` charges a `P`-null cell.
    pub log2_prob: f64,
    /// `-n D(t ‖ P)` in bits.
    pub log2_bound: f64,
}

/// Checks `P(T = t) ≤ 2^{-n D(t‖P)}` for an i.i.d. sample of length `n`.
///
/// On the support of `P` both sides share `∏ P^c`, so the check reduces to
/// the integer inequality `multinomial(c) · ∏ c^c ≤ nⁿ`, evaluated exactly.
pub fn type_prob_bound_check(t: &TypeVector, p: &JointDistribution) -> Result<TypeBoundCheck> {
    if t.alphabets != p.alphabets() {
        return Err(Error::InvalidDistribution("alphabet mismatch".into()));
    }
    let n = t.len;
    if t.counts.iter().sum::<u64>() != n {
        return Err(Error::InvalidParameter("type counts do not sum to its length".into()));
    }
    let d = super::kl_raw(&t.frequencies(), p.pmf());
    let log2_bound = -(n as f64) * d;
    let charges_null = t.counts.iter().zip(p.pmf()).any(|(&c, &q)| c > 0 && q == 0.0);
    if charges_null {
        return Ok(TypeBoundCheck { holds: true, log2_prob: f64::NEG_INFINITY, log2_bound });
    }
    let parts: Vec<usize> = t.counts.iter().map(|&c| c as usize).collect();
    let multi = multinomial(&parts);
    let mut lhs = multi.clone();
    for &c in &t.counts {
        lhs *= BigUint::from(c).pow(c as u32);
    }
    let rhs = BigUint::from(n).pow(n as u32);
    let log_p: f64 = t.counts.iter().zip(p.pmf()).filter(|(&c, _)| c > 0).map(|(&c, &q)| c as f64 * q.log2()).sum();
    Ok(TypeBoundCheck { holds: lhs <= rhs, log2_prob: big_log2(&multi) + log_p, log2_bound })
}
