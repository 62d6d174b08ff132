//! Achievability and converse conditions as finite-`n` predicates.
//!
//! Every check is an inequality `lhs ≤ rhs` in bits, evaluated on a grid;
//! the margin is the smallest `rhs - lhs` seen, so `satisfied ⇔ margin ≥ 0`.
//! Asymptotic side conditions are reported as ratios and never gate.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::block_index;
use crate::matchers::default_tm_eps;
use crate::perm::set_partitions;
use crate::typicality::{
    correction_terms, exponent_e_alpha, exponent_ehat, exponent_eprime_alpha, kl_raw, mutual_information,
    partition_mixture, CorrectionConfig, JointDistribution, MinimizerConfig,
};

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub satisfied: bool,
    /// Smallest `rhs - lhs` over the grid, in bits; `+inf` for an empty grid.
    pub margin: f64,
    /// Grid point attaining the margin (`α`, or a weight vector).
    pub worst: Vec<f64>,
    /// Grid spacing; 0 for closed-form checks.
    pub resolution: f64,
    /// Named ingredients of the check, evaluated at the worst point.
    pub terms: BTreeMap<String, f64>,
}

impl ConditionReport {
    fn new(margin: f64, worst: Vec<f64>, resolution: f64, terms: BTreeMap<String, f64>) -> Self {
        ConditionReport { satisfied: margin >= 0.0, margin, worst, resolution, terms }
    }
}

/// `max |log2(∏ P_{X_i} / P)|^+` over the support of `P`.
pub fn max_log_ratio(p: &JointDistribution) -> f64 {
    let prod = p.product_of_marginals();
    p.pmf().iter().zip(prod.pmf()).filter(|(&a, _)| a > 0.0).map(|(&a, &b)| (b / a).log2().max(0.0)).fold(0.0, f64::max)
}

/// Multiples of `step` in `[0, hi]`.
fn grid(hi: f64, step: f64) -> Vec<f64> {
    let k = (hi / step + 1e-9).floor() as usize;
    (0..=k).map(|i| ((i as f64 * step * 1e12).round() / 1e12).min(hi)).collect()
}

fn check_step(step: f64) -> Result<()> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidParameter(format!("grid step {step} outside (0, 1]")));
    }
    Ok(())
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need n >= 2, got {n}")));
    }
    Ok(())
}

fn check_pair(p: &JointDistribution) -> Result<()> {
    if p.arity() != 2 {
        return Err(Error::InvalidDistribution(format!("expected arity 2, got {}", p.arity())));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CerConditionConfig {
    pub alpha_step: f64,
    /// Typicality tolerance entering `δ_ε`; `None` uses the matcher default.
    pub eps: Option<f64>,
    pub minimizer: MinimizerConfig,
    pub corrections: CorrectionConfig,
}

impl Default for CerConditionConfig {
    fn default() -> Self {
        CerConditionConfig {
            alpha_step: 0.01,
            eps: None,
            minimizer: MinimizerConfig::default(),
            corrections: CorrectionConfig::default(),
        }
    }
}

/// One grid point of the pair condition. Exponents are taken at `α²`
/// for sequences of length `N = n(n-1)/2`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CerGridPoint {
    pub alpha: f64,
    pub e_alpha: f64,
    pub eprime_alpha: f64,
    pub ehat: f64,
    pub zeta: f64,
    pub zeta_prime: f64,
    pub delta_eps: f64,
    /// `2(1-α) log2 n / (n-1)`.
    pub lhs: f64,
    /// `max(E, E') - max(ζ, ζ') - δ_ε`.
    pub rhs: f64,
    pub margin: f64,
}

/// Evaluates the pair condition at every multiple of the step in `[0, alpha_max]`.
pub fn cer_condition_grid(
    p: &JointDistribution,
    n: usize,
    alpha_max: f64,
    cfg: &CerConditionConfig,
) -> Result<Vec<CerGridPoint>> {
    check_pair(p)?;
    check_n(n)?;
    check_step(cfg.alpha_step)?;
    if !(0.0..1.0).contains(&alpha_max) {
        return Err(Error::InvalidParameter(format!("alpha_max {alpha_max} outside [0, 1)")));
    }
    let ut = n * (n - 1) / 2;
    let eps = cfg.eps.unwrap_or_else(|| default_tm_eps(n));
    let log_n = (n as f64).log2();
    grid(alpha_max, cfg.alpha_step)
        .into_par_iter()
        .map(|alpha| {
            let a2 = alpha * alpha;
            let e = exponent_e_alpha(p, a2, &cfg.minimizer)?.value;
            let ep = exponent_eprime_alpha(p, a2, &cfg.minimizer)?.value;
            let ehat = exponent_ehat(p, a2)?;
            let c = correction_terms(ut, p, eps, a2, &cfg.corrections)?;
            let lhs = 2.0 * (1.0 - alpha) * log_n / (n - 1) as f64;
            let rhs = e.max(ep) - c.zeta.max(c.zeta_prime) - c.delta_eps;
            Ok(CerGridPoint {
                alpha,
                e_alpha: e,
                eprime_alpha: ep,
                ehat,
                zeta: c.zeta,
                zeta_prime: c.zeta_prime,
                delta_eps: c.delta_eps,
                lhs,
                rhs,
                margin: rhs - lhs,
            })
        })
        .collect()
}

fn cer_report(p: &JointDistribution, n: usize, points: &[CerGridPoint], cfg: &CerConditionConfig) -> ConditionReport {
    let mut terms = BTreeMap::new();
    terms.insert("eps".into(), cfg.eps.unwrap_or_else(|| default_tm_eps(n)));
    terms.insert("side_ratio".into(), max_log_ratio(p) / (n as f64).log2());
    let Some(w) = points.iter().min_by(|a, b| a.margin.total_cmp(&b.margin)) else {
        return ConditionReport::new(f64::INFINITY, Vec::new(), cfg.alpha_step, terms);
    };
    for (k, v) in [
        ("E", w.e_alpha),
        ("Eprime", w.eprime_alpha),
        ("Ehat", w.ehat),
        ("zeta", w.zeta),
        ("zeta_prime", w.zeta_prime),
        ("delta_eps", w.delta_eps),
        ("lhs", w.lhs),
        ("rhs", w.rhs),
    ] {
        terms.insert(k.into(), v);
    }
    ConditionReport::new(w.margin, vec![w.alpha], cfg.alpha_step, terms)
}

/// Sufficient condition for matching almost all vertices of a correlated
/// Erdős–Rényi pair, checked for `α ∈ [0, alpha_max]`.
pub fn cer_achievable(
    p: &JointDistribution,
    n: usize,
    alpha_max: f64,
    cfg: &CerConditionConfig,
) -> Result<ConditionReport> {
    if alpha_max <= 0.0 {
        return Err(Error::InvalidParameter(format!("alpha_max {alpha_max} must be positive")));
    }
    let points = cer_condition_grid(p, n, alpha_max, cfg)?;
    Ok(cer_report(p, n, &points, cfg))
}

/// Sufficient condition for matching at least a `β` fraction of vertices.
/// `β = 0` asks nothing and is satisfied with an infinite margin.
pub fn partial_matching_achievable(
    p: &JointDistribution,
    n: usize,
    beta: f64,
    cfg: &CerConditionConfig,
) -> Result<ConditionReport> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::InvalidParameter(format!("beta {beta} outside [0, 1)")));
    }
    if beta == 0.0 {
        check_pair(p)?;
        check_n(n)?;
        return Ok(cer_report(p, n, &[], cfg));
    }
    let points = cer_condition_grid(p, n, beta, cfg)?;
    Ok(cer_report(p, n, &points, cfg))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SbmConditionConfig {
    pub alpha_step: f64,
    /// Spacing of each per-community fixed-point fraction `α_i`.
    pub inner_step: f64,
    /// The outer check covers `α ∈ [0, 1 - delta]`.
    pub delta: f64,
    /// Cap on inner grid points per `α`.
    pub max_inner_points: usize,
}

impl Default for SbmConditionConfig {
    fn default() -> Self {
        SbmConditionConfig { alpha_step: 0.01, inner_step: 0.02, delta: 0.01, max_inner_points: 1_000_000 }
    }
}

/// Community-structure inputs shared by the SBM checks.
fn check_blocks(joints: &[JointDistribution], sizes: &[usize], n: usize) -> Result<usize> {
    check_n(n)?;
    let c = sizes.len();
    if c == 0 || sizes.contains(&0) || sizes.iter().sum::<usize>() != n {
        return Err(Error::InvalidParameter(format!("community sizes {sizes:?} do not partition {n} vertices")));
    }
    if joints.len() != c * (c + 1) / 2 {
        return Err(Error::LengthMismatch { expected: c * (c + 1) / 2, got: joints.len() });
    }
    for j in joints {
        check_pair(j)?;
    }
    Ok(c)
}

/// `D(P ‖ (1-β) P_X P_Y + β P)` with `β` clamped to `[0, 1]`.
fn mixture_divergence(p: &JointDistribution, prod: &[f64], beta: f64) -> f64 {
    let b = beta.clamp(0.0, 1.0);
    let mix: Vec<f64> = prod.iter().zip(p.pmf()).map(|(&q, &a)| (1.0 - b) * q + b * a).collect();
    kl_raw(p.pmf(), &mix)
}

/// Weighted block divergence for per-community fixed-point fractions `a`.
fn sbm_rhs(joints: &[JointDistribution], prods: &[Vec<f64>], sizes: &[usize], n: usize, a: &[f64]) -> f64 {
    let c = sizes.len();
    let nf = n as f64;
    let mut total = 0.0;
    for i in 0..c {
        let ni = sizes[i] as f64;
        for j in i..c {
            let k = block_index(c, i, j);
            if i == j {
                if sizes[i] < 2 {
                    continue;
                }
                let fixed = nf * a[i];
                let beta = fixed * (fixed - 1.0) / (ni * (ni - 1.0));
                total += ni * (ni - 1.0) / (2.0 * nf * nf) * mixture_divergence(&joints[k], &prods[k], beta);
            } else {
                let nj = sizes[j] as f64;
                let beta = nf * nf * a[i] * a[j] / (ni * nj);
                total += ni * nj / (nf * nf) * mixture_divergence(&joints[k], &prods[k], beta);
            }
        }
    }
    total
}

/// Inner minimisation over `{α_i ≤ n_i/n, Σ α_i = α}`: the largest
/// community absorbs the remainder, the others range over their grids.
fn sbm_inner(
    joints: &[JointDistribution],
    prods: &[Vec<f64>],
    sizes: &[usize],
    n: usize,
    alpha: f64,
    cfg: &SbmConditionConfig,
) -> Result<Option<(f64, Vec<f64>)>> {
    let c = sizes.len();
    let caps: Vec<f64> = sizes.iter().map(|&s| s as f64 / n as f64).collect();
    let dep = (0..c).max_by_key(|&i| (sizes[i], std::cmp::Reverse(i))).expect("c >= 1");
    let free: Vec<usize> = (0..c).filter(|&i| i != dep).collect();
    let axes: Vec<Vec<f64>> = free
        .iter()
        .map(|&i| {
            let mut g = grid(caps[i], cfg.inner_step);
            if g.last().is_some_and(|&v| v < caps[i]) {
                g.push(caps[i]);
            }
            g
        })
        .collect();
    let total: f64 = axes.iter().map(|a| a.len() as f64).product();
    if total > cfg.max_inner_points as f64 {
        return Err(Error::TooLarge(format!("{total} inner grid points")));
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut idx = vec![0usize; free.len()];
    let mut a = vec![0.0; c];
    loop {
        let mut used = 0.0;
        for (k, &i) in free.iter().enumerate() {
            a[i] = axes[k][idx[k]];
            used += a[i];
        }
        let rest = alpha - used;
        if rest >= -1e-12 && rest <= caps[dep] + 1e-12 {
            a[dep] = rest.clamp(0.0, caps[dep]);
            let v = sbm_rhs(joints, prods, sizes, n, &a);
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, a.clone()));
            }
        }
        let mut k = 0;
        loop {
            if k == free.len() {
                return Ok(best);
            }
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Sufficient condition for matching a correlated pair with known
/// community memberships. `joints` are indexed by [`block_index`].
pub fn sbm_achievable(
    joints: &[JointDistribution],
    sizes: &[usize],
    n: usize,
    cfg: &SbmConditionConfig,
) -> Result<ConditionReport> {
    let c = check_blocks(joints, sizes, n)?;
    check_step(cfg.alpha_step)?;
    check_step(cfg.inner_step)?;
    if !(0.0..=1.0).contains(&cfg.delta) {
        return Err(Error::InvalidParameter(format!("delta {} outside [0, 1]", cfg.delta)));
    }
    let prods: Vec<Vec<f64>> = joints.iter().map(|j| j.product_of_marginals().pmf().to_vec()).collect();
    let log_n = (n as f64).log2();
    let rows: Vec<Option<(f64, f64, Vec<f64>)>> = grid(1.0 - cfg.delta, cfg.alpha_step)
        .into_par_iter()
        .map(|alpha| {
            let inner = sbm_inner(joints, &prods, sizes, n, alpha, cfg)?;
            let lhs = 3.0 * (1.0 - alpha) * log_n / n as f64;
            Ok(inner.map(|(rhs, a)| {
                let mut worst = vec![alpha];
                worst.extend(a);
                (rhs - lhs, lhs, worst)
            }))
        })
        .collect::<Result<_>>()?;
    let mut terms = BTreeMap::new();
    let side = joints.iter().map(max_log_ratio).fold(0.0, f64::max);
    terms.insert("side_ratio".into(), side / log_n);
    terms.insert("communities".into(), c as f64);
    match rows.into_iter().flatten().min_by(|a, b| a.0.total_cmp(&b.0)) {
        Some((margin, lhs, worst)) => {
            terms.insert("lhs".into(), lhs);
            terms.insert("rhs".into(), margin + lhs);
            Ok(ConditionReport::new(margin, worst, cfg.alpha_step, terms))
        }
        None => Ok(ConditionReport::new(f64::INFINITY, Vec::new(), cfg.alpha_step, terms)),
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CollectionConditionConfig {
    /// Spacing of the weight simplex; `1/step` must be an integer.
    pub simplex_step: f64,
    /// Largest admissible weight of the all-coincident class.
    pub fixed_max: f64,
    pub max_points: usize,
}

impl Default for CollectionConditionConfig {
    fn default() -> Self {
        CollectionConditionConfig { simplex_step: 0.05, fixed_max: 0.95, max_points: 2_000_000 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CollectionReport {
    pub report: ConditionReport,
    /// Canonical partitions of the coordinates, as printed sets.
    pub partitions: Vec<String>,
    /// `meet[k'][k'']`: index of the common refinement of partitions `k'` and `k''`.
    pub meet: Vec<Vec<usize>>,
}

/// Compositions of `total` into `parts` nonnegative parts, last part `≤ last_max`.
fn compositions(total: usize, parts: usize, last_max: usize) -> Vec<Vec<usize>> {
    fn rec(rest: usize, parts: usize, last_max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            if rest <= last_max {
                cur.push(rest);
                out.push(cur.clone());
                cur.pop();
            }
            return;
        }
        for v in 0..=rest {
            cur.push(v);
            rec(rest - v, parts - 1, last_max, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(total, parts, last_max, &mut Vec::with_capacity(parts), &mut out);
    out
}

/// Sufficient condition for matching a collection of `m` correlated graphs.
///
/// Weights `α_k` over the canonical partitions sum to 1; the class where all
/// preimages coincide is last and capped by `fixed_max`. Mixture weights
/// `α'_k` sum `α_{k'} α_{k''}` over ordered pairs whose meet is partition `k`.
pub fn collection_achievable(
    p: &JointDistribution,
    n: usize,
    cfg: &CollectionConditionConfig,
) -> Result<CollectionReport> {
    check_n(n)?;
    let m = p.arity();
    if m < 2 {
        return Err(Error::InvalidDistribution("collection condition needs arity >= 2".into()));
    }
    check_step(cfg.simplex_step)?;
    let steps = (1.0 / cfg.simplex_step).round();
    if (steps * cfg.simplex_step - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("1/{} is not an integer", cfg.simplex_step)));
    }
    if !(0.0..1.0).contains(&cfg.fixed_max) {
        return Err(Error::InvalidParameter(format!("fixed_max {} outside [0, 1)", cfg.fixed_max)));
    }
    let parts = set_partitions(m);
    let b = parts.len();
    let steps = steps as usize;
    let count = crate::perm::binomial(steps + b - 1, b - 1);
    if count > cfg.max_points.into() {
        return Err(Error::TooLarge(format!("{count} simplex points for {b} partitions")));
    }
    let meet: Vec<Vec<usize>> = parts
        .iter()
        .map(|a| {
            parts
                .iter()
                .map(|c| {
                    let r = a.meet(c);
                    parts.iter().position(|q| *q == r).expect("meet is a partition")
                })
                .collect()
        })
        .collect();
    let sizes: Vec<f64> = parts.iter().map(|q| q.block_count() as f64).collect();
    let last_max = (cfg.fixed_max * steps as f64 + 1e-9).floor() as usize;
    let denom = 2.0 * (b as f64 - 1.0) * ((m * (m - 1) + 1) as f64);
    let log_n = (n as f64).log2();
    let best = compositions(steps, b, last_max)
        .into_par_iter()
        .map(|comp| {
            let w: Vec<f64> = comp.iter().map(|&k| k as f64 / steps as f64).collect();
            let mut wp = vec![0.0; b];
            for (i, row) in meet.iter().enumerate() {
                for (j, &k) in row.iter().enumerate() {
                    wp[k] += w[i] * w[j];
                }
            }
            let norm: f64 = wp.iter().sum();
            wp.iter_mut().for_each(|v| *v /= norm);
            let q = partition_mixture(p, &wp)?;
            let rhs = kl_raw(p.pmf(), &q) / denom;
            let lhs = log_n / n as f64 * (sizes.iter().zip(&w).map(|(s, a)| s * a).sum::<f64>() - 1.0);
            Ok((rhs - lhs, lhs, w))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0));
    let mut terms = BTreeMap::new();
    terms.insert("side_ratio".into(), max_log_ratio(p) / log_n);
    terms.insert("denominator".into(), denom);
    let report = match best {
        Some((margin, lhs, w)) => {
            terms.insert("lhs".into(), lhs);
            terms.insert("rhs".into(), margin + lhs);
            ConditionReport::new(margin, w, cfg.simplex_step, terms)
        }
        None => ConditionReport::new(f64::INFINITY, Vec::new(), cfg.simplex_step, terms),
    };
    Ok(CollectionReport { report, partitions: parts.iter().map(|q| q.to_string()).collect(), meet })
}

/// Necessary condition `log2 n / n ≤ Σ_{i<j} (n_i n_j/n²) I_ij + Σ_i (n_i(n_i-1)/2n²) I_ii`.
pub fn converse_necessary(joints: &[JointDistribution], sizes: &[usize], n: usize) -> Result<ConditionReport> {
    let c = check_blocks(joints, sizes, n)?;
    let nf = n as f64;
    let mut terms = BTreeMap::new();
    let mut rhs = 0.0;
    for i in 0..c {
        for j in i..c {
            let info = mutual_information(&joints[block_index(c, i, j)])?;
            let (ni, nj) = (sizes[i] as f64, sizes[j] as f64);
            let w = if i == j { ni * (ni - 1.0) / (2.0 * nf * nf) } else { ni * nj / (nf * nf) };
            terms.insert(format!("I[{i},{j}]"), info);
            rhs += w * info;
        }
    }
    let lhs = nf.log2() / nf;
    terms.insert("lhs".into(), lhs);
    terms.insert("rhs".into(), rhs);
    Ok(ConditionReport::new(rhs - lhs, Vec::new(), 0.0, terms))
}

/// Single-community form `2 log2 n / n ≤ I(X;X')`.
pub fn converse_cer(p: &JointDistribution, n: usize) -> Result<ConditionReport> {
    check_n(n)?;
    let info = mutual_information(p)?;
    let lhs = 2.0 * (n as f64).log2() / n as f64;
    let terms = BTreeMap::from([("lhs".to_string(), lhs), ("rhs".to_string(), info)]);
    Ok(ConditionReport::new(info - lhs, Vec::new(), 0.0, terms))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeededRegion {
    Matchable {
        /// `⌈2 log2 n / I⌉`.
        lambda_min: u64,
        mutual_information: f64,
        /// `I √Λ_min`; must grow without bound along a sequence.
        side_ratio: f64,
    },
    /// `I = 0`: no seed count suffices.
    Unmatchable,
}

/// Smallest seed count for seeded matching of an `n`-vertex pair.
pub fn seeded_region(p: &JointDistribution, n: usize) -> Result<SeededRegion> {
    check_n(n)?;
    let info = mutual_information(p)?;
    if info <= 1e-15 {
        return Ok(SeededRegion::Unmatchable);
    }
    // the slack absorbs rounding when the quotient is an integer
    let lambda_min = (2.0 * (n as f64).log2() / info - 1e-9).ceil().max(1.0) as u64;
    Ok(SeededRegion::Matchable { lambda_min, mutual_information: info, side_ratio: info * (lambda_min as f64).sqrt() })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ErasureScanConfig {
    /// Split between the `E` range and the `E'` range.
    pub alpha0: f64,
    pub alpha_max: f64,
    pub alpha_step: f64,
    /// `p = θ ln n / n`.
    pub theta: f64,
    pub n_ref: f64,
    pub minimizer: MinimizerConfig,
}

impl Default for ErasureScanConfig {
    fn default() -> Self {
        ErasureScanConfig {
            alpha0: 0.8,
            alpha_max: 0.99,
            alpha_step: 0.01,
            theta: 1.0,
            n_ref: 1e6,
            minimizer: MinimizerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ErasurePoint {
    pub alpha: f64,
    /// Exponent at `α²`, in nats.
    pub exponent: f64,
    /// `exponent / (2(1-α)p)`.
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErasureScan {
    pub s: f64,
    pub p: f64,
    pub threshold: f64,
    /// `E` ratios on `[0, α₀]`.
    pub low: Vec<ErasurePoint>,
    /// `E'` ratios on `[α₀, α_max]`.
    pub high: Vec<ErasurePoint>,
    pub min_low: f64,
    pub min_high: f64,
    /// `min_low > s/2`.
    pub low_exceeds: bool,
    /// Both minima exceed `s/2`.
    pub exceeds: bool,
    pub warning: Option<String>,
}

/// Ratio scan for the erasure model at the reference density
/// `p = θ ln n_ref / n_ref`, compared against `s/2`.
pub fn erasure_ratio_scan(s: f64, cfg: &ErasureScanConfig) -> Result<ErasureScan> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidParameter(format!("retention {s} outside [0, 1]")));
    }
    check_step(cfg.alpha_step)?;
    if !(0.0 <= cfg.alpha0 && cfg.alpha0 <= cfg.alpha_max && cfg.alpha_max < 1.0) {
        return Err(Error::InvalidParameter("need 0 <= alpha0 <= alpha_max < 1".into()));
    }
    if !(cfg.n_ref > 1.0 && cfg.theta > 0.0) {
        return Err(Error::InvalidParameter("need n_ref > 1 and theta > 0".into()));
    }
    let p = cfg.theta * cfg.n_ref.ln() / cfg.n_ref;
    if p >= 1.0 {
        return Err(Error::InvalidParameter(format!("edge density {p} is not below 1")));
    }
    let joint = crate::generators::erasure_joint(p, s)?;
    let warning = (!(0.25 < s && s < 0.5)).then(|| format!("retention {s} outside (1/4, 1/2)"));
    let ln2 = std::f64::consts::LN_2;
    let scan = |alphas: Vec<f64>, prime: bool| -> Result<Vec<ErasurePoint>> {
        alphas
            .into_par_iter()
            .map(|alpha| {
                let a2 = alpha * alpha;
                let bits = if prime {
                    exponent_eprime_alpha(&joint, a2, &cfg.minimizer)?.value
                } else {
                    exponent_e_alpha(&joint, a2, &cfg.minimizer)?.value
                };
                let exponent = bits * ln2;
                Ok(ErasurePoint { alpha, exponent, ratio: exponent / (2.0 * (1.0 - alpha) * p) })
            })
            .collect()
    };
    let low = scan(grid(cfg.alpha0, cfg.alpha_step), false)?;
    let mut high_grid: Vec<f64> = grid(cfg.alpha_max, cfg.alpha_step).into_iter().filter(|&a| a > cfg.alpha0).collect();
    high_grid.insert(0, cfg.alpha0);
    let high = scan(high_grid, true)?;
    let min_of = |v: &[ErasurePoint]| v.iter().map(|e| e.ratio).fold(f64::INFINITY, f64::min);
    let (min_low, min_high) = (min_of(&low), min_of(&high));
    let threshold = s / 2.0;
    Ok(ErasureScan {
        s,
        p,
        threshold,
        low,
        high,
        min_low,
        min_high,
        low_exceeds: min_low > threshold,
        exceeds: min_low > threshold && min_high > threshold,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corr(q: f64) -> JointDistribution {
        JointDistribution::pair(2, 2, vec![(1.0 - q) / 2.0, q / 2.0, q / 2.0, (1.0 - q) / 2.0]).unwrap()
    }

    fn quick() -> CerConditionConfig {
        CerConditionConfig {
            alpha_step: 0.05,
            minimizer: MinimizerConfig { grid_step: 0.05, ..MinimizerConfig::default() },
            ..CerConditionConfig::default()
        }
    }

    #[test]
    fn product_is_unsatisfied() {
        let r = cer_achievable(&corr(0.5), 1000, 0.95, &quick()).unwrap();
        assert!(!r.satisfied && r.margin < 0.0);
        assert_eq!(r.worst, vec![0.0]);
    }

    #[test]
    fn perfect_correlation_is_satisfied() {
        let r = cer_achievable(&corr(0.0), 10_000, 0.95, &quick()).unwrap();
        assert!(r.satisfied && r.margin > 0.0, "{r:?}");
        // the positive part vanishes: P never falls below the product
        assert_eq!(r.terms["side_ratio"], 0.0);
        let r = cer_achievable(&corr(0.1), 10_000, 0.95, &quick()).unwrap();
        assert!((r.terms["side_ratio"] - 5f64.log2() / 10_000f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn margin_grows_with_correlation() {
        let margins: Vec<f64> = [0.5, 0.4, 0.3, 0.2, 0.1, 0.0]
            .iter()
            .map(|&q| cer_achievable(&corr(q), 2000, 0.9, &quick()).unwrap().margin)
            .collect();
        assert!(margins.windows(2).all(|w| w[0] <= w[1] + 1e-12), "{margins:?}");
    }

    #[test]
    fn partial_matching_grid() {
        let p = corr(0.3);
        let cfg = quick();
        let zero = partial_matching_achievable(&p, 500, 0.0, &cfg).unwrap();
        assert!(zero.satisfied && zero.margin == f64::INFINITY);
        let ms: Vec<f64> = [0.1, 0.3, 0.5, 0.7, 0.9]
            .iter()
            .map(|&b| partial_matching_achievable(&p, 500, b, &cfg).unwrap().margin)
            .collect();
        assert!(ms.windows(2).all(|w| w[1] <= w[0]), "{ms:?}");
        let full = cer_achievable(&p, 500, 0.9, &cfg).unwrap();
        assert_eq!(full.margin, ms[4]);
    }

    #[test]
    fn sbm_single_community_matches_pair_form() {
        let p = corr(0.1);
        let n = 400;
        let cfg = SbmConditionConfig { alpha_step: 0.05, ..SbmConditionConfig::default() };
        let r = sbm_achievable(std::slice::from_ref(&p), &[n], n, &cfg).unwrap();
        let nf = n as f64;
        let direct = grid(1.0 - cfg.delta, cfg.alpha_step)
            .into_iter()
            .map(|a| {
                let beta = nf * a * (nf * a - 1.0) / (nf * (nf - 1.0));
                let rhs = 3.0 * (nf - 1.0) / (2.0 * nf) * exponent_ehat(&p, beta.clamp(0.0, 1.0)).unwrap();
                rhs - 3.0 * (1.0 - a) * nf.log2() / nf
            })
            .fold(f64::INFINITY, f64::min);
        assert!((r.margin - direct).abs() < 1e-12, "{} vs {direct}", r.margin);
    }

    #[test]
    fn sbm_product_blocks_unsatisfied_and_informative_block() {
        let prod = corr(0.5);
        let cfg = SbmConditionConfig { alpha_step: 0.05, inner_step: 0.05, ..SbmConditionConfig::default() };
        let r = sbm_achievable(&[prod.clone(), prod.clone(), prod.clone()], &[60, 40], 100, &cfg).unwrap();
        assert!(!r.satisfied);
        // one informative block lifts the margin above the all-product one
        let r2 = sbm_achievable(&[corr(0.0), prod.clone(), prod.clone()], &[60, 40], 100, &cfg).unwrap();
        assert!(r2.margin > r.margin);
        assert!(r2.worst.len() == 3 && (r2.worst[1] + r2.worst[2] - r2.worst[0]).abs() < 1e-9);
        assert!(sbm_achievable(&vec![prod.clone(); 3], &[60, 30], 100, &cfg).is_err());
        assert!(sbm_achievable(&vec![prod.clone(); 2], &[60, 40], 100, &cfg).is_err());
    }

    #[test]
    fn collection_pair_reduces_to_pair_form() {
        let p = corr(0.1);
        let n = 300;
        let cfg = CollectionConditionConfig::default();
        let r = collection_achievable(&p, n, &cfg).unwrap();
        assert_eq!(r.partitions, vec!["{1}{2}", "{1,2}"]);
        assert_eq!(r.meet, vec![vec![0, 0], vec![0, 1]]);
        let nf = n as f64;
        let direct = grid(cfg.fixed_max, cfg.simplex_step)
            .into_iter()
            .map(|a| exponent_ehat(&p, a * a).unwrap() / 2.0 - (1.0 - a) * nf.log2() / nf)
            .fold(f64::INFINITY, f64::min);
        assert!((r.report.margin - direct).abs() < 1e-12, "{} vs {direct}", r.report.margin);
    }

    #[test]
    fn collection_dependent_and_product() {
        let dep = JointDistribution::new(vec![2, 2, 2], vec![0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5]).unwrap();
        let r = collection_achievable(&dep, 1000, &CollectionConditionConfig::default()).unwrap();
        assert!(r.report.satisfied, "{:?}", r.report);
        assert_eq!(r.partitions.len(), 5);
        let prod = JointDistribution::new(vec![2, 2, 2], vec![0.125; 8]).unwrap();
        let r = collection_achievable(&prod, 1000, &CollectionConditionConfig::default()).unwrap();
        assert!(!r.report.satisfied);
    }

    #[test]
    fn converse_examples() {
        let r = converse_cer(&corr(0.5), 100).unwrap();
        assert!(!r.satisfied);
        let one_bit = corr(0.0);
        let holds: Vec<usize> = (2..=20).filter(|&n| converse_cer(&one_bit, n).unwrap().satisfied).collect();
        let expected: Vec<usize> = std::iter::once(2).chain(4..=20).collect();
        assert_eq!(holds, expected);
        // single community: weighted sum carries the factor (n-1)/2n
        for (q, n) in [(0.2, 50), (0.05, 200), (0.45, 1000)] {
            let a = converse_necessary(&[corr(q)], &[n], n).unwrap();
            let b = converse_cer(&corr(q), n - 1).unwrap();
            let nf = n as f64;
            assert!((a.terms["rhs"] - b.terms["rhs"] * (nf - 1.0) / (2.0 * nf)).abs() < 1e-15);
            assert_eq!(a.satisfied, 2.0 * nf.log2() / (nf - 1.0) <= b.terms["rhs"]);
        }
    }

    #[test]
    fn seeded_region_examples() {
        // choose q so that I = 0.1 bit exactly enough for the formula check
        let info_of = |q: f64| mutual_information(&corr(q)).unwrap();
        let (mut lo, mut hi) = (0.0, 0.5);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if info_of(mid) > 0.1 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let p = corr(lo);
        match seeded_region(&p, 1024).unwrap() {
            SeededRegion::Matchable { lambda_min, side_ratio, .. } => {
                assert_eq!(lambda_min, 200);
                assert!((side_ratio - 0.1 * 200f64.sqrt()).abs() < 1e-9);
            }
            SeededRegion::Unmatchable => panic!("I > 0"),
        }
        assert_eq!(seeded_region(&corr(0.5), 1024).unwrap(), SeededRegion::Unmatchable);
        let p = corr(0.2);
        let step = (2.0 / info_of(0.2)).ceil() as i64;
        for n in [100usize, 1000, 5000] {
            let get = |n| match seeded_region(&p, n).unwrap() {
                SeededRegion::Matchable { lambda_min, .. } => lambda_min as i64,
                SeededRegion::Unmatchable => unreachable!(),
            };
            assert!((get(2 * n) - get(n) - step).abs() <= 1);
        }
    }

    #[test]
    fn erasure_scan_small_retention_is_trivial() {
        let cfg = ErasureScanConfig {
            alpha_step: 0.1,
            alpha_max: 0.9,
            minimizer: MinimizerConfig { grid_step: 0.05, ..MinimizerConfig::default() },
            ..ErasureScanConfig::default()
        };
        let r = erasure_ratio_scan(0.01, &cfg).unwrap();
        assert!(r.warning.is_some());
        assert!(r.low_exceeds, "{} vs {}", r.min_low, r.threshold);
        assert_eq!(r.low.len(), 9);
        assert_eq!(r.high[0].alpha, 0.8);
    }
    #[test]
    fn erasure_scan_reference_points() {
        let at =
            |n_ref: f64| erasure_ratio_scan(0.4, &ErasureScanConfig { n_ref, ..ErasureScanConfig::default() }).unwrap();
        let (a, b) = (at(1e6), at(1e8));
        assert!(a.warning.is_none());
        assert!(a.low_exceeds && a.min_low > 0.2, "{}", a.min_low);
        assert!((a.min_low - b.min_low).abs() < 1e-3);
        assert!((a.min_high - b.min_high).abs() < 1e-3);
    }
}
