use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{MatchReport, Outcome};
use crate::error::{Error, Result};
use crate::generators::SeededPair;
use crate::graph::{accuracy, AttributedGraph};
use crate::perm::{Labeling, Permutation};
use crate::rng::substream;
use crate::typicality::{JointDistribution, TypicalBox};

/// Attributes of one vertex toward an ordered seed set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Fingerprint(pub Vec<u8>);

pub fn fingerprint(vertex: usize, seeds: &[usize], g: &AttributedGraph) -> Result<Fingerprint> {
    if vertex >= g.n() {
        return Err(Error::InvalidParameter(format!("vertex {vertex} outside [0, {})", g.n())));
    }
    if seeds.contains(&vertex) {
        return Err(Error::InvalidParameter(format!("vertex {vertex} is a seed")));
    }
    Ok(Fingerprint(seeds.iter().map(|&s| g.attr(vertex, s)).collect()))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StmConfig {
    /// Fixed tolerance; `None` uses `Λ^{-0.4}` for the current seed count `Λ`.
    pub eps: Option<f64>,
    pub passes: usize,
    /// Seed for filling unresolved vertices.
    pub seed: u64,
}

impl Default for StmConfig {
    fn default() -> Self {
        StmConfig { eps: None, passes: 2, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StmPass {
    pub seeds: usize,
    pub eps: f64,
    pub matched: usize,
    /// Vertices left ambiguous after this pass.
    pub ambiguous: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StmTrace {
    pub passes: Vec<StmPass>,
    /// Every non-seed vertex was matched by a unique typical candidate.
    pub strict_success: bool,
    /// Vertices assigned a leftover label at random.
    pub filled: usize,
}

/// Seeded typicality matching.
///
/// `seeds` are vertices of `g2` whose labels are revealed; `reverse_seeds[k]`
/// is the `g1` vertex with the same label as `seeds[k]`. A non-seed `g2`
/// vertex is matched when exactly one free `g1` vertex has a fingerprint
/// jointly typical with its own; a `g1` vertex claimed by several `g2`
/// vertices matches none of them. Matches of a pass join the seed set of
/// the next. Unresolved vertices finally receive the leftover labels in a
/// seeded random order.
#[allow(clippy::too_many_arguments)]
pub fn stm_match_graphs(
    g1: &AttributedGraph,
    sigma1: &Labeling,
    g2: &AttributedGraph,
    p: &JointDistribution,
    seeds: &[usize],
    reverse_seeds: &[usize],
    truth: Option<&Labeling>,
    cfg: &StmConfig,
) -> Result<MatchReport> {
    let start = Instant::now();
    let n = g1.n();
    if g2.n() != n || sigma1.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: g2.n() });
    }
    if seeds.len() != reverse_seeds.len() {
        return Err(Error::LengthMismatch { expected: seeds.len(), got: reverse_seeds.len() });
    }
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("seeded matching needs at least one seed".into()));
    }
    if p.arity() != 2 {
        return Err(Error::InvalidDistribution("expected arity 2".into()));
    }
    // partner[v] = matched g1 vertex of g2 vertex v
    let mut partner: Vec<Option<usize>> = vec![None; n];
    let mut taken = vec![false; n];
    for (&v, &u) in seeds.iter().zip(reverse_seeds) {
        if v >= n || u >= n || partner[v].is_some() || taken[u] {
            return Err(Error::InvalidParameter("seed sets must be distinct vertices".into()));
        }
        partner[v] = Some(u);
        taken[u] = true;
    }
    let mut s2: Vec<usize> = seeds.to_vec();
    let mut s1: Vec<usize> = reverse_seeds.to_vec();
    let ly = p.alphabets()[1];
    let mut trace = Vec::new();
    let mut last_eps = 0.0;
    for _ in 0..cfg.passes.max(1) {
        let open2: Vec<usize> = (0..n).filter(|&v| partner[v].is_none()).collect();
        if open2.is_empty() {
            break;
        }
        let open1: Vec<usize> = (0..n).filter(|&u| !taken[u]).collect();
        let lambda = s2.len();
        let eps = cfg.eps.unwrap_or((lambda as f64).powf(-0.4));
        last_eps = eps;
        let bx = TypicalBox::new(p, eps, lambda);
        let f1: Vec<Vec<u8>> = open1.iter().map(|&u| s1.iter().map(|&s| g1.attr(u, s)).collect()).collect();
        let candidates: Vec<Option<usize>> = open2
            .par_iter()
            .map(|&v| {
                let f2: Vec<u8> = s2.iter().map(|&s| g2.attr(v, s)).collect();
                let mut hit = None;
                for (k, fu) in f1.iter().enumerate() {
                    if typical_pair(fu, &f2, ly, &bx) {
                        if hit.is_some() {
                            return None;
                        }
                        hit = Some(open1[k]);
                    }
                }
                hit
            })
            .collect();
        let mut claims = vec![0usize; n];
        for u in candidates.iter().flatten() {
            claims[*u] += 1;
        }
        let mut matched = 0;
        for (&v, c) in open2.iter().zip(&candidates) {
            if let Some(u) = *c {
                if claims[u] == 1 {
                    partner[v] = Some(u);
                    taken[u] = true;
                    s2.push(v);
                    s1.push(u);
                    matched += 1;
                }
            }
        }
        let ambiguous = open2.len() - matched;
        trace.push(StmPass { seeds: lambda, eps, matched, ambiguous });
    }
    let unresolved: Vec<usize> = (0..n).filter(|&v| partner[v].is_none()).collect();
    let mut free1: Vec<usize> = (0..n).filter(|&u| !taken[u]).collect();
    free1.shuffle(&mut substream(cfg.seed, "stm-fill", 0));
    for (&v, &u) in unresolved.iter().zip(&free1) {
        partner[v] = Some(u);
    }
    let images: Vec<usize> = partner.iter().map(|u| sigma1.apply(u.expect("every vertex assigned"))).collect();
    let est = Permutation::from_images(images.clone())?;
    let accuracy = truth.map(|t| accuracy(t, &est)).transpose()?;
    Ok(MatchReport {
        model: "seeded".into(),
        n,
        outcome: Outcome::Matched,
        labelings: vec![images],
        ambiguity_size: unresolved.len() as u64,
        eps: last_eps,
        seed: cfg.seed,
        accuracy,
        truth_in_set: None,
        mean_set_accuracy: None,
        min_set_accuracy: None,
        members: None,
        stm: Some(StmTrace { passes: trace, strict_success: unresolved.is_empty(), filled: unresolved.len() }),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Count-window test with early exit.
fn typical_pair(a: &[u8], b: &[u8], ly: usize, bx: &TypicalBox) -> bool {
    let mut counts = [0i64; 64];
    let cells = bx.lo.len();
    let mut heap;
    let counts: &mut [i64] = if cells <= 64 {
        &mut counts[..cells]
    } else {
        heap = vec![0i64; cells];
        &mut heap
    };
    for (&x, &y) in a.iter().zip(b) {
        let k = x as usize * ly + y as usize;
        counts[k] += 1;
        if counts[k] > bx.hi[k] {
            return false;
        }
    }
    counts.iter().zip(&bx.lo).all(|(c, l)| c >= l)
}

pub fn stm_match(sp: &SeededPair, cfg: &StmConfig) -> Result<MatchReport> {
    let pr = &sp.pair;
    stm_match_graphs(&pr.g1, &pr.sigma1, &pr.g2, &pr.joints[0], &sp.seeds, &sp.reverse_seeds, Some(&pr.sigma2), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{erasure_joint, gen_seeded};

    fn corr(q: f64) -> JointDistribution {
        JointDistribution::pair(2, 2, vec![(1.0 - q) / 2.0, q / 2.0, q / 2.0, (1.0 - q) / 2.0]).unwrap()
    }

    #[test]
    fn fingerprint_basics() {
        let sp = gen_seeded(30, &corr(0.0), 8, 1).unwrap();
        let g2 = &sp.pair.g2;
        let v = (0..30).find(|v| !sp.seeds.contains(v)).unwrap();
        let f = fingerprint(v, &sp.seeds, g2).unwrap();
        for (k, &s) in sp.seeds.iter().enumerate() {
            assert_eq!(f.0[k], g2.attr(v, s));
        }
        assert!(fingerprint(sp.seeds[0], &sp.seeds, g2).is_err());
        assert!(fingerprint(v, &[], g2).unwrap().0.is_empty());
        // perfectly correlated: matched vertices share fingerprints
        let u = sp.pair.sigma1.inverse().apply(sp.pair.sigma2.apply(v));
        assert_eq!(fingerprint(u, &sp.reverse_seeds, &sp.pair.g1).unwrap(), f);
    }

    #[test]
    fn full_seeds_perfect() {
        let sp = gen_seeded(60, &corr(0.0), 59, 2).unwrap();
        let r = stm_match(&sp, &StmConfig::default()).unwrap();
        assert_eq!(r.accuracy, Some(1.0));
    }

    #[test]
    fn moderate_instance_and_monotone_seeds() {
        let sp = gen_seeded(300, &erasure_joint(0.5, 0.5).unwrap(), 40, 3).unwrap();
        let r = stm_match(&sp, &StmConfig::default()).unwrap();
        let one = stm_match(&sp, &StmConfig { passes: 1, ..StmConfig::default() }).unwrap();
        // every pass-1 match survives pass 2
        let t = r.stm.as_ref().unwrap();
        assert_eq!(t.passes[0], one.stm.as_ref().unwrap().passes[0]);
        let matched_first: Vec<usize> =
            (0..300).filter(|v| !sp.seeds.contains(v)).filter(|&v| one.labelings[0][v] == r.labelings[0][v]).collect();
        assert!(matched_first.len() >= t.passes[0].matched);
        assert!(r.accuracy.unwrap() > 0.9, "{:?}", r.accuracy);
        let again = stm_match(&sp, &StmConfig::default()).unwrap();
        assert!(r.same_result(&again));
    }
}
