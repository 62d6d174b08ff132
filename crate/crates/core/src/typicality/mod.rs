//! Joint distributions, empirical types, strong typicality and divergences.
//!
//! All logarithms are base 2.

mod exponents;
mod oracle;

pub use exponents::{
    collection_exponent, correction_terms, exponent_e_alpha, exponent_ehat, exponent_eprime_alpha,
    minimize_on_box_simplex, partition_mixture, permutation_bounds, CorrectionConfig, CorrectionTerms, ExponentResult,
    MinimizerConfig, PermutationBounds,
};
pub use oracle::{
    type_prob_bound_check, typicality_prob_exact, typicality_prob_exact_pair, typicality_prob_mc, McEstimate,
    TypeBoundCheck,
};

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-12;

/// Probability mass over `∏ alphabets`, stored row-major (last coordinate fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistFile", into = "DistFile")]
pub struct JointDistribution {
    alphabets: Vec<usize>,
    pmf: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DistFile {
    alphabets: Vec<usize>,
    pmf: Vec<f64>,
}

impl TryFrom<DistFile> for JointDistribution {
    type Error = Error;
    fn try_from(f: DistFile) -> Result<Self> {
        JointDistribution::new(f.alphabets, f.pmf)
    }
}

impl From<JointDistribution> for DistFile {
    fn from(d: JointDistribution) -> Self {
        DistFile { alphabets: d.alphabets, pmf: d.pmf }
    }
}

impl JointDistribution {
    pub fn new(alphabets: Vec<usize>, pmf: Vec<f64>) -> Result<Self> {
        if alphabets.is_empty() || alphabets.iter().any(|&a| a == 0 || a > 256) {
            return Err(Error::InvalidDistribution(format!("bad alphabet sizes {alphabets:?}")));
        }
        let size: usize = alphabets.iter().product();
        if pmf.len() != size {
            return Err(Error::InvalidDistribution(format!("pmf has {} entries, expected {size}", pmf.len())));
        }
        if pmf.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidDistribution("entries must be finite and nonnegative".into()));
        }
        let s: f64 = pmf.iter().sum();
        if (s - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidDistribution(format!("pmf sums to {s}")));
        }
        Ok(JointDistribution { alphabets, pmf })
    }

    /// Arity-2 distribution with `pmf[x * ly + y]`.
    pub fn pair(lx: usize, ly: usize, pmf: Vec<f64>) -> Result<Self> {
        Self::new(vec![lx, ly], pmf)
    }

    /// Scales nonnegative weights to a pmf.
    pub fn from_weights(alphabets: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        let s: f64 = weights.iter().sum();
        if s.is_nan() || s <= 0.0 {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        Self::new(alphabets, weights.into_iter().map(|w| w / s).collect())
    }

    /// Independent uniform weights, normalised; every cell positive almost surely.
    pub fn random<R: Rng + ?Sized>(alphabets: Vec<usize>, rng: &mut R) -> Self {
        let size: usize = alphabets.iter().product();
        let w: Vec<f64> = (0..size).map(|_| rng.gen_range(0.01..1.0)).collect();
        Self::from_weights(alphabets, w).expect("positive weights")
    }

    pub fn arity(&self) -> usize {
        self.alphabets.len()
    }

    pub fn alphabets(&self) -> &[usize] {
        &self.alphabets
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn size(&self) -> usize {
        self.pmf.len()
    }

    pub fn index(&self, tuple: &[usize]) -> usize {
        tuple.iter().zip(&self.alphabets).fold(0, |acc, (&x, &a)| acc * a + x)
    }

    pub fn tuple(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.arity()];
        for (slot, &a) in out.iter_mut().zip(&self.alphabets).rev() {
            *slot = idx % a;
            idx /= a;
        }
        out
    }

    /// Marginal on the given coordinates, in the given order.
    pub fn marginal(&self, coords: &[usize]) -> JointDistribution {
        let alphabets: Vec<usize> = coords.iter().map(|&c| self.alphabets[c]).collect();
        let size: usize = alphabets.iter().product();
        let mut pmf = vec![0.0; size];
        for (i, &p) in self.pmf.iter().enumerate() {
            let t = self.tuple(i);
            let j = coords.iter().zip(&alphabets).fold(0, |acc, (&c, &a)| acc * a + t[c]);
            pmf[j] += p;
        }
        JointDistribution { alphabets, pmf }
    }

    /// Product of single-coordinate marginals.
    pub fn product_of_marginals(&self) -> JointDistribution {
        let margs: Vec<Vec<f64>> = (0..self.arity()).map(|c| self.marginal(&[c]).pmf).collect();
        let pmf =
            (0..self.size()).map(|i| self.tuple(i).iter().enumerate().map(|(c, &x)| margs[c][x]).product()).collect();
        JointDistribution { alphabets: self.alphabets.clone(), pmf }
    }

    /// `P(x, y)` for arity 2.
    #[inline]
    pub fn p(&self, x: usize, y: usize) -> f64 {
        self.pmf[x * self.alphabets[1] + y]
    }

    pub fn px(&self) -> Vec<f64> {
        self.marginal(&[0]).pmf
    }

    pub fn py(&self) -> Vec<f64> {
        self.marginal(&[1]).pmf
    }

    /// Coordinates swapped (arity 2).
    pub fn transpose(&self) -> JointDistribution {
        let (lx, ly) = (self.alphabets[0], self.alphabets[1]);
        let mut pmf = vec![0.0; lx * ly];
        for x in 0..lx {
            for y in 0..ly {
                pmf[y * lx + x] = self.p(x, y);
            }
        }
        JointDistribution { alphabets: vec![ly, lx], pmf }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Empirical joint type of `k` equal-length sequences, as integer counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TypeVector {
    pub alphabets: Vec<usize>,
    pub counts: Vec<u64>,
    pub len: u64,
}

impl TypeVector {
    pub fn frequencies(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.len as f64).collect()
    }
}

pub fn joint_type(seqs: &[&[u8]], alphabets: &[usize]) -> Result<TypeVector> {
    if seqs.len() != alphabets.len() || seqs.is_empty() {
        return Err(Error::LengthMismatch { expected: alphabets.len(), got: seqs.len() });
    }
    let len = seqs[0].len();
    if len == 0 {
        return Err(Error::InvalidParameter("empty sequences".into()));
    }
    if let Some(s) = seqs.iter().find(|s| s.len() != len) {
        return Err(Error::LengthMismatch { expected: len, got: s.len() });
    }
    let size: usize = alphabets.iter().product();
    let mut counts = vec![0u64; size];
    for i in 0..len {
        let mut idx = 0;
        for (s, &a) in seqs.iter().zip(alphabets) {
            let x = s[i] as usize;
            if x >= a {
                return Err(Error::SymbolOutOfRange { symbol: x, size: a });
            }
            idx = idx * a + x;
        }
        counts[idx] += 1;
    }
    Ok(TypeVector { alphabets: alphabets.to_vec(), counts, len: len as u64 })
}

/// Integer count window per cell for sequences of a fixed length.
///
/// A count vector lies in the box iff its type is within `±ε` of `P`
/// cell-wise and vanishes on every `P`-null cell.
#[derive(Debug, Clone)]
pub struct TypicalBox {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

impl TypicalBox {
    pub fn new(p: &JointDistribution, eps: f64, len: usize) -> Self {
        Self::from_pmf(p.pmf(), eps, len)
    }

    pub fn from_pmf(pmf: &[f64], eps: f64, len: usize) -> Self {
        let nf = len as f64;
        let tol = 1e-9 * nf.max(1.0);
        let lo = pmf.iter().map(|&p| ((p - eps) * nf - tol).ceil().max(0.0) as i64).collect();
        let hi = pmf.iter().map(|&p| if p == 0.0 { 0 } else { ((p + eps) * nf + tol).floor() as i64 }).collect();
        TypicalBox { lo, hi }
    }

    #[inline]
    pub fn contains(&self, counts: &[u64]) -> bool {
        counts.iter().zip(self.lo.iter().zip(&self.hi)).all(|(&c, (&lo, &hi))| c as i64 >= lo && c as i64 <= hi)
    }

    /// False if no count vector summing to `len` fits.
    pub fn feasible(&self, len: usize) -> bool {
        let lo: i64 = self.lo.iter().sum();
        let hi: i64 = self.hi.iter().sum();
        self.lo.iter().zip(&self.hi).all(|(l, h)| l <= h) && lo <= len as i64 && len as i64 <= hi
    }
}

/// Strong ε-typicality of the sequences with respect to `P`.
pub fn is_strongly_typical(seqs: &[&[u8]], p: &JointDistribution, eps: f64) -> Result<bool> {
    if eps < 0.0 {
        return Err(Error::InvalidParameter(format!("negative epsilon {eps}")));
    }
    let t = joint_type(seqs, p.alphabets())?;
    Ok(TypicalBox::new(p, eps, t.len as usize).contains(&t.counts))
}

/// A divergence value; `Infinite` when the first argument charges a null cell of the second.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub enum Divergence {
    Finite(f64),
    Infinite,
}

impl Divergence {
    pub fn is_finite(&self) -> bool {
        matches!(self, Divergence::Finite(_))
    }

    /// `f64::INFINITY` for the infinite case.
    pub fn value(&self) -> f64 {
        match *self {
            Divergence::Finite(v) => v,
            Divergence::Infinite => f64::INFINITY,
        }
    }
}

/// `Σ p log2(p/q)` with `0 log 0 = 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<Divergence> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch { expected: q.len(), got: p.len() });
    }
    let v = kl_raw(p, q);
    Ok(if v.is_finite() { Divergence::Finite(v) } else { Divergence::Infinite })
}

pub fn kl_type(t: &TypeVector, q: &JointDistribution) -> Result<Divergence> {
    if t.alphabets != q.alphabets() {
        return Err(Error::InvalidDistribution("alphabet mismatch".into()));
    }
    kl_divergence(&t.frequencies(), q.pmf())
}

/// Unchecked KL in bits; `+inf` on support violation.
pub(crate) fn kl_raw(p: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            s += a * (a / b).log2();
        }
    }
    s.max(0.0)
}

/// `I(X;Y) = D(P_XY ‖ P_X P_Y)` for an arity-2 distribution.
pub fn mutual_information(p: &JointDistribution) -> Result<f64> {
    if p.arity() != 2 {
        return Err(Error::InvalidDistribution(format!("expected arity 2, got {}", p.arity())));
    }
    Ok(kl_raw(p.pmf(), p.product_of_marginals().pmf()))
}

pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.log2()).sum::<f64>()
}
