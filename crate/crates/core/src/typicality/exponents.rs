//! Error exponents for the typicality of permuted correlated sequences,
//! their finite-length correction terms, and the box-simplex minimiser.

use serde::{Deserialize, Serialize};

use super::{kl_raw, mutual_information, JointDistribution};
use crate::error::{Error, Result};
use crate::perm::set_partitions;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MinimizerConfig {
    /// Coarse grid spacing per free coordinate, as a fraction of its box width.
    pub grid_step: f64,
    /// Local refinement stops once its step (same units) falls below this.
    pub min_step: f64,
    /// Upper bound on coarse grid size; the spacing widens to respect it.
    pub max_grid_points: usize,
}

impl Default for MinimizerConfig {
    fn default() -> Self {
        MinimizerConfig { grid_step: 0.02, min_step: 1e-7, max_grid_points: 200_000 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExponentResult {
    /// Bits per symbol.
    pub value: f64,
    /// Minimising argument (empty for closed forms).
    pub argmin: Vec<f64>,
    /// Final refinement step, relative to box width; 0 when exact.
    pub resolution: f64,
    pub evaluations: usize,
}

impl ExponentResult {
    fn exact(value: f64, argmin: Vec<f64>) -> Self {
        ExponentResult { value, argmin, resolution: 0.0, evaluations: 1 }
    }
}

struct Chart<'a> {
    lo: &'a [f64],
    hi: &'a [f64],
    search: Vec<usize>,
    dependent: Option<usize>,
}

impl Chart<'_> {
    /// Point of the simplex for normalised search coordinates, if feasible.
    fn point(&self, u: &[f64]) -> Option<Vec<f64>> {
        let mut t: Vec<f64> = self.lo.to_vec();
        for (&i, &ui) in self.search.iter().zip(u) {
            t[i] = self.lo[i] + ui * (self.hi[i] - self.lo[i]);
        }
        match self.dependent {
            Some(d) => {
                let rest: f64 = t.iter().enumerate().filter(|&(i, _)| i != d).map(|(_, v)| v).sum();
                let v = 1.0 - rest;
                if v < self.lo[d] - 1e-12 || v > self.hi[d] + 1e-12 {
                    return None;
                }
                t[d] = v.clamp(self.lo[d], self.hi[d]);
            }
            None => {
                if (t.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return None;
                }
            }
        }
        Some(t)
    }

    fn coords(&self, t: &[f64]) -> Vec<f64> {
        self.search.iter().map(|&i| (t[i] - self.lo[i]) / (self.hi[i] - self.lo[i])).collect()
    }
}

/// Minimises `f` over `{t : lo ≤ t ≤ hi, Σ t = 1}`.
///
/// A coarse grid in box-normalised coordinates is followed by a local
/// pattern search that halves its step until `min_step`. Every feasible
/// point in `seeds` is evaluated, so the result never exceeds `f` there.
pub fn minimize_on_box_simplex(
    lo: &[f64],
    hi: &[f64],
    seeds: &[Vec<f64>],
    f: impl Fn(&[f64]) -> f64,
    cfg: &MinimizerConfig,
) -> Result<ExponentResult> {
    if lo.len() != hi.len() {
        return Err(Error::LengthMismatch { expected: lo.len(), got: hi.len() });
    }
    let mut free: Vec<usize> = (0..lo.len()).filter(|&i| hi[i] - lo[i] > 1e-15).collect();
    let dependent = free.iter().copied().max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])));
    free.retain(|&i| Some(i) != dependent);
    let chart = Chart { lo, hi, search: free, dependent };
    let s = chart.search.len();

    let mut evals = 0usize;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let consider = |u: Vec<f64>, best: &mut Option<(f64, Vec<f64>)>, evals: &mut usize| {
        if let Some(t) = chart.point(&u) {
            *evals += 1;
            let v = f(&t);
            if v.is_finite() && best.as_ref().is_none_or(|(b, _)| v < *b) {
                *best = Some((v, u));
            }
        }
    };

    for seed in seeds {
        if seed.len() == lo.len()
            && seed.iter().zip(lo.iter().zip(hi)).all(|(&t, (&l, &h))| t >= l - 1e-12 && t <= h + 1e-12)
        {
            consider(chart.coords(seed), &mut best, &mut evals);
        }
    }

    let mut k = (1.0 / cfg.grid_step).round().max(1.0) as usize;
    if s > 0 {
        while k > 1 && ((k + 1) as f64).powi(s as i32) > cfg.max_grid_points as f64 {
            k -= 1;
        }
    }
    let total = (k + 1).pow(s as u32);
    let mut idx = vec![0usize; s];
    for _ in 0..total {
        let u: Vec<f64> = idx.iter().map(|&i| i as f64 / k as f64).collect();
        consider(u, &mut best, &mut evals);
        for slot in idx.iter_mut() {
            *slot += 1;
            if *slot <= k {
                break;
            }
            *slot = 0;
        }
    }

    let Some((mut value, mut u)) = best else {
        return Err(Error::InvalidParameter("constraint set has no feasible grid point".into()));
    };

    let mut h = if s > 0 { 1.0 / k as f64 } else { 0.0 };
    let neighbours = 3usize.pow(s as u32);
    while s > 0 && h >= cfg.min_step {
        let mut round_best: Option<(f64, Vec<f64>)> = None;
        for code in 0..neighbours {
            let mut c = code;
            let cand: Vec<f64> = u
                .iter()
                .map(|&ui| {
                    let d = (c % 3) as f64 - 1.0;
                    c /= 3;
                    (ui + d * h).clamp(0.0, 1.0)
                })
                .collect();
            if cand == u {
                continue;
            }
            consider(cand, &mut round_best, &mut evals);
        }
        match round_best {
            Some((v, cand)) if v < value => {
                value = v;
                u = cand;
            }
            _ => h /= 2.0,
        }
    }
    let argmin = chart.point(&u).expect("best point is feasible");
    Ok(ExponentResult { value: value.max(0.0), argmin, resolution: h, evaluations: evals })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) || alpha.is_nan() {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} outside [0, 1]")));
    }
    Ok(())
}

fn check_pair(p: &JointDistribution) -> Result<()> {
    if p.arity() != 2 {
        return Err(Error::InvalidDistribution(format!("expected arity 2, got {}", p.arity())));
    }
    Ok(())
}

/// Box `[(q - α)/(1 - α), q/(1 - α)] ∩ [0, 1]` per coordinate.
fn alpha_box(q: &[f64], alpha: f64) -> (Vec<f64>, Vec<f64>) {
    let lo = q.iter().map(|&v| ((v - alpha) / (1.0 - alpha)).max(0.0)).collect();
    let hi = q.iter().map(|&v| (v / (1.0 - alpha)).min(1.0)).collect();
    (lo, hi)
}

/// `t'' = (q - (1 - α) t') / α`, clipped at 0.
fn complement(q: &[f64], t: &[f64], alpha: f64) -> Vec<f64> {
    q.iter().zip(t).map(|(&a, &b)| ((a - (1.0 - alpha) * b) / alpha).max(0.0)).collect()
}

/// Exponent `E_α` built on the marginal type of the non-fixed positions.
pub fn exponent_e_alpha(p: &JointDistribution, alpha: f64, cfg: &MinimizerConfig) -> Result<ExponentResult> {
    check_pair(p)?;
    check_alpha(alpha)?;
    let px = p.px();
    if alpha == 1.0 {
        return Ok(ExponentResult::exact(0.0, px));
    }
    if alpha == 0.0 {
        return Ok(ExponentResult::exact(0.5 * mutual_information(p)?, px));
    }
    let (lx, ly) = (p.alphabets()[0], p.alphabets()[1]);
    let objective = |t: &[f64]| {
        let t2 = complement(&px, t, alpha);
        let mut py2 = vec![0.0; ly];
        for x in 0..lx {
            if px[x] > 0.0 {
                for (y, slot) in py2.iter_mut().enumerate() {
                    *slot += t[x] * p.p(x, y) / px[x];
                }
            }
        }
        let mix: Vec<f64> =
            (0..lx * ly).map(|c| (1.0 - alpha) * px[c / ly] * py2[c % ly] + alpha * p.pmf()[c]).collect();
        0.5 * ((1.0 - alpha) * kl_raw(t, &px) + alpha * kl_raw(&t2, &px) + kl_raw(p.pmf(), &mix))
    };
    let (lo, hi) = alpha_box(&px, alpha);
    minimize_on_box_simplex(&lo, &hi, std::slice::from_ref(&px), objective, cfg)
}

/// Exponent `E'_α` built on the joint type of the non-fixed positions.
pub fn exponent_eprime_alpha(p: &JointDistribution, alpha: f64, cfg: &MinimizerConfig) -> Result<ExponentResult> {
    check_pair(p)?;
    check_alpha(alpha)?;
    if alpha == 1.0 {
        return Ok(ExponentResult::exact(0.0, p.pmf().to_vec()));
    }
    let prod = p.product_of_marginals();
    if alpha == 0.0 {
        return Ok(ExponentResult::exact(mutual_information(p)? / 3.0, p.pmf().to_vec()));
    }
    let objective = |t: &[f64]| {
        let t2 = complement(p.pmf(), t, alpha);
        (1.0 - alpha) / 3.0 * kl_raw(t, prod.pmf()) + alpha * kl_raw(&t2, p.pmf())
    };
    let (lo, hi) = alpha_box(p.pmf(), alpha);
    minimize_on_box_simplex(&lo, &hi, &[p.pmf().to_vec()], objective, cfg)
}

/// Closed-form lower bound `⅓ D(P ‖ (1-α) P_X P_Y + α P)`.
pub fn exponent_ehat(p: &JointDistribution, alpha: f64) -> Result<f64> {
    check_pair(p)?;
    check_alpha(alpha)?;
    let prod = p.product_of_marginals();
    let mix: Vec<f64> = prod.pmf().iter().zip(p.pmf()).map(|(&a, &b)| (1.0 - alpha) * a + alpha * b).collect();
    Ok(kl_raw(p.pmf(), &mix) / 3.0)
}

/// `Σ_j w_j ∏_{B ∈ 𝒫_j} P_{X_B}` over the canonical partitions of the coordinates.
pub fn partition_mixture(p: &JointDistribution, weights: &[f64]) -> Result<Vec<f64>> {
    let k = p.arity();
    let parts = set_partitions(k);
    if weights.len() != parts.len() {
        return Err(Error::LengthMismatch { expected: parts.len(), got: weights.len() });
    }
    if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("weights {weights:?} are not a distribution")));
    }
    let mut q = vec![0.0; p.size()];
    let tuples: Vec<Vec<usize>> = (0..p.size()).map(|i| p.tuple(i)).collect();
    for (part, &w) in parts.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        let blocks = part.blocks();
        let margs: Vec<JointDistribution> = blocks.iter().map(|b| p.marginal(b)).collect();
        for (slot, t) in q.iter_mut().zip(&tuples) {
            let mut prod = w;
            for (b, m) in blocks.iter().zip(&margs) {
                let sub: Vec<usize> = b.iter().map(|&c| t[c]).collect();
                prod *= m.pmf()[m.index(&sub)];
            }
            *slot += prod;
        }
    }
    Ok(q)
}

/// Decay exponent for `k` jointly permuted sequences whose index classes
/// have the given weights over the canonical partitions of `[k]`.
pub fn collection_exponent(p: &JointDistribution, weights: &[f64]) -> Result<f64> {
    let k = p.arity();
    if k < 2 {
        return Err(Error::InvalidDistribution("collection exponent needs arity >= 2".into()));
    }
    let q = partition_mixture(p, weights)?;
    let bk = weights.len() as f64;
    Ok(kl_raw(p.pmf(), &q) / (((k * (k - 1) + 1) as f64) * (bk - 1.0)))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CorrectionConfig {
    /// Constant `C` in `ζ'_n = C |X||Y| log((n+1)/n)`.
    pub zeta_prime_const: f64,
    /// Coefficient of the additive `O(ε)` term in `δ_ε`.
    pub delta_eps_slack: f64,
}

impl Default for CorrectionConfig {
    fn default() -> Self {
        CorrectionConfig { zeta_prime_const: 12.0, delta_eps_slack: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CorrectionTerms {
    pub zeta: f64,
    pub zeta_prime: f64,
    pub delta_eps: f64,
}

/// `ζ_n`, `ζ'_n` and `δ_ε` for sequences of length `n` and fixed-point fraction `α`.
pub fn correction_terms(
    n: usize,
    p: &JointDistribution,
    eps: f64,
    alpha: f64,
    cfg: &CorrectionConfig,
) -> Result<CorrectionTerms> {
    check_pair(p)?;
    check_alpha(alpha)?;
    if n == 0 || eps < 0.0 {
        return Err(Error::InvalidParameter(format!("need n >= 1 and eps >= 0, got n = {n}, eps = {eps}")));
    }
    let (lx, ly) = (p.alphabets()[0] as f64, p.alphabets()[1] as f64);
    let nf = n as f64;
    let l = (nf + 1.0).log2() / nf;
    let zeta = 1.5 * lx * lx * ly * l + 6.0 * lx * ly * l;
    let zeta_prime = cfg.zeta_prime_const * lx * ly * ((nf + 1.0) / nf).log2();
    let prod = p.product_of_marginals();
    let max_log = p
        .pmf()
        .iter()
        .zip(prod.pmf())
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| (a / (alpha * a + (1.0 - alpha) * b)).log2())
        .fold(f64::NEG_INFINITY, f64::max);
    let delta_eps = eps * lx * ly * max_log.abs() + cfg.delta_eps_slack * eps;
    Ok(CorrectionTerms { zeta, zeta_prime, delta_eps })
}

/// Upper bounds on `P((Xⁿ, π(Yⁿ)) typical)` for a permutation with `fixed`
/// fixed points, one per exponent, each with its own correction terms.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PermutationBounds {
    pub alpha: f64,
    pub e: f64,
    pub eprime: f64,
    pub ehat: f64,
    pub terms: CorrectionTerms,
    /// `-n(E - ζ - δ_ε)`.
    pub log2_e: f64,
    /// `-n(E' - ζ' - δ_ε)`.
    pub log2_eprime: f64,
    /// `-n(Ê' - ζ' - δ_ε/3)`.
    pub log2_ehat: f64,
}

impl PermutationBounds {
    /// `log2` of the smallest of the three bounds.
    pub fn log2_min(&self) -> f64 {
        self.log2_e.min(self.log2_eprime).min(self.log2_ehat)
    }
}

pub fn permutation_bounds(
    p: &JointDistribution,
    n: usize,
    fixed: usize,
    eps: f64,
    mcfg: &MinimizerConfig,
    ccfg: &CorrectionConfig,
) -> Result<PermutationBounds> {
    if n == 0 || fixed > n {
        return Err(Error::InvalidParameter(format!("need 0 <= fixed <= n, n >= 1; got fixed = {fixed}, n = {n}")));
    }
    let alpha = fixed as f64 / n as f64;
    let e = exponent_e_alpha(p, alpha, mcfg)?.value;
    let eprime = exponent_eprime_alpha(p, alpha, mcfg)?.value;
    let ehat = exponent_ehat(p, alpha)?;
    let terms = correction_terms(n, p, eps, alpha, ccfg)?;
    let nf = n as f64;
    Ok(PermutationBounds {
        alpha,
        e,
        eprime,
        ehat,
        terms,
        log2_e: -nf * (e - terms.zeta - terms.delta_eps),
        log2_eprime: -nf * (eprime - terms.zeta_prime - terms.delta_eps),
        log2_ehat: -nf * (ehat - terms.zeta_prime - terms.delta_eps / 3.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn cfg() -> MinimizerConfig {
        MinimizerConfig::default()
    }

    fn sym(q: f64) -> JointDistribution {
        JointDistribution::pair(2, 2, vec![(1.0 - q) / 2.0, q / 2.0, q / 2.0, (1.0 - q) / 2.0]).unwrap()
    }

    #[test]
    fn endpoints() {
        let p = sym(0.1);
        let i = mutual_information(&p).unwrap();
        assert_eq!(exponent_e_alpha(&p, 1.0, &cfg()).unwrap().value, 0.0);
        assert_eq!(exponent_eprime_alpha(&p, 1.0, &cfg()).unwrap().value, 0.0);
        assert!(exponent_ehat(&p, 1.0).unwrap().abs() < 1e-15);
        assert!((exponent_e_alpha(&p, 0.0, &cfg()).unwrap().value - i / 2.0).abs() < 1e-15);
        assert!((exponent_eprime_alpha(&p, 0.0, &cfg()).unwrap().value - i / 3.0).abs() < 1e-15);
        assert!((exponent_ehat(&p, 0.0).unwrap() - i / 3.0).abs() < 1e-15);
    }

    #[test]
    fn e_alpha_continuous_at_zero() {
        let p = sym(0.2);
        let i = mutual_information(&p).unwrap();
        let v = exponent_e_alpha(&p, 1e-6, &cfg()).unwrap().value;
        assert!((v - i / 2.0).abs() < 1e-4, "{v} vs {}", i / 2.0);
    }

    #[test]
    fn product_distribution_gives_zero() {
        let p = JointDistribution::pair(2, 3, vec![0.12, 0.18, 0.3, 0.08, 0.12, 0.2]).unwrap();
        for a in [0.0, 0.3, 0.7] {
            assert!(exponent_e_alpha(&p, a, &cfg()).unwrap().value < 1e-12);
            assert!(exponent_eprime_alpha(&p, a, &cfg()).unwrap().value < 1e-12);
            assert!(exponent_ehat(&p, a).unwrap() < 1e-12);
        }
    }

    #[test]
    fn chain_on_random_instances() {
        let mut rng = substream(5, "test", 0);
        for i in 0..15 {
            let p = JointDistribution::random(vec![2, 2 + i % 2], &mut rng);
            for a in [0.1, 0.5, 0.9] {
                let e = exponent_e_alpha(&p, a, &cfg()).unwrap().value;
                let ep = exponent_eprime_alpha(&p, a, &cfg()).unwrap().value;
                let eh = exponent_ehat(&p, a).unwrap();
                assert!(2.0 / 3.0 * e <= eh + 1e-12, "{e} {eh}");
                assert!(eh <= ep + 1e-9, "{eh} {ep}");
            }
        }
    }

    #[test]
    fn minimizer_finds_interior_optimum() {
        // min Σ (t_i - c_i)^2 on the simplex with c inside
        let c = [0.2, 0.5, 0.3];
        let f = |t: &[f64]| t.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let r = minimize_on_box_simplex(&[0.0; 3], &[1.0; 3], &[], f, &cfg()).unwrap();
        assert!(r.value < 1e-12);
        for (a, b) in r.argmin.iter().zip(&c) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn minimizer_tiny_box() {
        // box width 1e-6 in one coordinate must still be searched
        let lo = [0.0, 1.0 - 1e-6];
        let hi = [1e-6, 1.0];
        let f = |t: &[f64]| (t[0] - 3e-7).abs();
        let r = minimize_on_box_simplex(&lo, &hi, &[], f, &cfg()).unwrap();
        assert!(r.value < 1e-12, "{}", r.value);
    }

    #[test]
    fn collection_k2_matches_ehat() {
        let p = sym(0.15);
        for a in [0.0, 0.25, 0.8] {
            let c = collection_exponent(&p, &[1.0 - a, a]).unwrap();
            assert!((c - exponent_ehat(&p, a).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn collection_single_set_is_zero() {
        let mut rng = substream(9, "test", 0);
        let p = JointDistribution::random(vec![2, 2, 2], &mut rng);
        assert!(collection_exponent(&p, &[0.0, 0.0, 0.0, 0.0, 1.0]).unwrap().abs() < 1e-15);
        assert!(collection_exponent(&p, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn collection_k3_direct() {
        let mut rng = substream(9, "test", 1);
        let p = JointDistribution::random(vec![2, 2, 2], &mut rng);
        let w = [0.4, 0.1, 0.2, 0.1, 0.2];
        // direct evaluation of each partition's product of block marginals
        let pr = |c: &[usize], t: &[usize]| -> f64 {
            let m = p.marginal(c);
            let sub: Vec<usize> = c.iter().map(|&i| t[i]).collect();
            m.pmf()[m.index(&sub)]
        };
        let mut d = 0.0;
        for i in 0..8 {
            let t = p.tuple(i);
            let q = w[0] * pr(&[0], &t) * pr(&[1], &t) * pr(&[2], &t)
                + w[1] * pr(&[0, 1], &t) * pr(&[2], &t)
                + w[2] * pr(&[0, 2], &t) * pr(&[1], &t)
                + w[3] * pr(&[0], &t) * pr(&[1, 2], &t)
                + w[4] * p.pmf()[i];
            d += p.pmf()[i] * (p.pmf()[i] / q).log2();
        }
        let v = collection_exponent(&p, &w).unwrap();
        assert!((v - d / (7.0 * 4.0)).abs() < 1e-14);
    }

    #[test]
    fn corrections() {
        let p = sym(0.1);
        let c = CorrectionConfig::default();
        assert_eq!(correction_terms(100, &p, 0.0, 0.3, &c).unwrap().delta_eps, 0.0);
        let mut prev = f64::INFINITY;
        for n in [3, 10, 100, 1000, 10000] {
            let z = correction_terms(n, &p, 0.0, 0.0, &c).unwrap().zeta;
            assert!(z < prev);
            prev = z;
        }
        let d1 = correction_terms(50, &p, 0.01, 0.4, &c).unwrap().delta_eps;
        let d2 = correction_terms(50, &p, 0.02, 0.4, &c).unwrap().delta_eps;
        assert!((d2 - 2.0 * d1).abs() < 1e-15);
    }
}
