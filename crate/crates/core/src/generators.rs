//! Samplers for correlated graph pairs, seeded pairs and collections.
//!
//! Labels are identified with the vertices of the first graph (`σ1` is the
//! identity). The second graph's vertex `v` carries the hidden label
//! `σ2(v)`; for every label pair `i < j` the attributes of the two graphs
//! at those labels are drawn jointly, independently across pairs.

use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, CommunityStructure};
use crate::perm::{Labeling, Permutation};
use crate::rng::{substream, StreamRng};
use crate::typicality::JointDistribution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Cer,
    Sbm,
    Erasure { p: f64, s: f64 },
}

#[derive(Debug, Clone)]
pub struct CorrelatedPair {
    pub g1: AttributedGraph,
    pub g2: AttributedGraph,
    pub sigma1: Labeling,
    /// Hidden truth: vertex `v` of `g2` has label `sigma2(v)`.
    pub sigma2: Labeling,
    pub model: Model,
    /// One joint for CER; one per community block for SBM.
    pub joints: Vec<JointDistribution>,
    /// Community of each label, when the model has communities.
    pub communities: Option<CommunityStructure>,
}

impl CorrelatedPair {
    pub fn n(&self) -> usize {
        self.g1.n()
    }
}

#[derive(Debug, Clone)]
pub struct SeededPair {
    pub pair: CorrelatedPair,
    /// Seed vertices of `g2`, ascending.
    pub seeds: Vec<usize>,
    /// `reverse_seeds[k]` is the `g1` vertex sharing the label of `seeds[k]`.
    pub reverse_seeds: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct GraphCollection {
    pub graphs: Vec<AttributedGraph>,
    /// `labelings[0]` is the revealed identity; the rest are hidden.
    pub labelings: Vec<Labeling>,
    pub joint: JointDistribution,
}

fn sampler(p: &JointDistribution) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(p.pmf()).map_err(|e| Error::InvalidDistribution(e.to_string()))
}

/// Builds `m` graphs from label-space UT rows: `rows[g][ut(i, j)]` is the
/// attribute of graph `g` at labels `(i, j)`, and graph `g`'s vertex `v`
/// carries label `labelings[g](v)`.
fn assemble(n: usize, alphabets: &[usize], labelings: &[Labeling], rows: &[Vec<u8>]) -> Result<Vec<AttributedGraph>> {
    labelings
        .iter()
        .zip(rows)
        .zip(alphabets)
        .map(|((sigma, row), &l)| {
            AttributedGraph::from_fn(n, l.max(2), |u, v| {
                let (a, b) = (sigma.apply(u), sigma.apply(v));
                let (a, b) = if a < b { (a, b) } else { (b, a) };
                row[crate::perm::ut_index(n, a, b)] as usize
            })
        })
        .collect()
}

/// Draws label-space UT rows; `block_of(i, j)` picks the joint for labels `(i, j)`.
fn draw_rows(
    n: usize,
    joints: &[JointDistribution],
    block_of: impl Fn(usize, usize) -> usize,
    rng: &mut StreamRng,
) -> Result<Vec<Vec<u8>>> {
    let m = joints[0].arity();
    let samplers: Vec<WeightedIndex<f64>> = joints.iter().map(sampler).collect::<Result<_>>()?;
    let len = n * n.saturating_sub(1) / 2;
    let mut rows = vec![Vec::with_capacity(len); m];
    for i in 0..n {
        for j in i + 1..n {
            let b = block_of(i, j);
            let t = joints[b].tuple(samplers[b].sample(rng));
            for (row, x) in rows.iter_mut().zip(t) {
                row.push(x as u8);
            }
        }
    }
    Ok(rows)
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need n >= 2, got {n}")));
    }
    Ok(())
}

fn check_pair_joint(p: &JointDistribution) -> Result<()> {
    if p.arity() != 2 {
        return Err(Error::InvalidDistribution(format!("expected arity 2, got {}", p.arity())));
    }
    Ok(())
}

/// Correlated pair of Erdős–Rényi-type graphs with edge-pair law `P`.
pub fn gen_cper(n: usize, p: &JointDistribution, seed: u64) -> Result<CorrelatedPair> {
    check_n(n)?;
    check_pair_joint(p)?;
    let sigma2 = Permutation::random(n, &mut substream(seed, "sigma", 0));
    let rows = draw_rows(n, std::slice::from_ref(p), |_, _| 0, &mut substream(seed, "edges", 0))?;
    let sigma1 = Permutation::identity(n);
    let mut gs = assemble(n, p.alphabets(), &[sigma1.clone(), sigma2.clone()], &rows)?;
    let g2 = gs.pop().expect("two graphs");
    let g1 = gs.pop().expect("two graphs");
    Ok(CorrelatedPair { g1, g2, sigma1, sigma2, model: Model::Cer, joints: vec![p.clone()], communities: None })
}

/// Joint law of the erasure model: the second graph keeps each edge of
/// the first with probability `s`.
pub fn erasure_joint(p: f64, s: f64) -> Result<JointDistribution> {
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidParameter(format!("need p, s in [0, 1], got p = {p}, s = {s}")));
    }
    JointDistribution::pair(2, 2, vec![1.0 - p, 0.0, p * (1.0 - s), p * s])
}

/// Erasure-model pair; identical to [`gen_cper`] with [`erasure_joint`].
pub fn gen_erasure(n: usize, p: f64, s: f64, seed: u64) -> Result<CorrelatedPair> {
    let mut pair = gen_cper(n, &erasure_joint(p, s)?, seed)?;
    pair.model = Model::Erasure { p, s };
    Ok(pair)
}

/// Correlated pair with community structure. `comm` gives the community of
/// each label; `joints[comm.block_index(a, b)]` governs label pairs across
/// communities `a` and `b`.
pub fn gen_cpcs(
    n: usize,
    comm: &CommunityStructure,
    joints: &[JointDistribution],
    seed: u64,
) -> Result<CorrelatedPair> {
    check_n(n)?;
    if comm.n() != n {
        return Err(Error::LengthMismatch { expected: n, got: comm.n() });
    }
    if joints.len() != comm.block_count() {
        return Err(Error::InvalidParameter(format!(
            "expected {} block joints for {} communities, got {}",
            comm.block_count(),
            comm.c(),
            joints.len()
        )));
    }
    for j in joints {
        check_pair_joint(j)?;
        if j.alphabets() != joints[0].alphabets() {
            return Err(Error::InvalidDistribution("block joints must share alphabets".into()));
        }
    }
    let sigma2 = Permutation::random(n, &mut substream(seed, "sigma", 0));
    let rows = draw_rows(n, joints, |i, j| comm.block_index(comm.of(i), comm.of(j)), &mut substream(seed, "edges", 0))?;
    let sigma1 = Permutation::identity(n);
    let mut gs = assemble(n, joints[0].alphabets(), &[sigma1.clone(), sigma2.clone()], &rows)?;
    let g2 = gs.pop().expect("two graphs");
    let g1 = gs.pop().expect("two graphs");
    Ok(CorrelatedPair {
        g1,
        g2,
        sigma1,
        sigma2,
        model: Model::Sbm,
        joints: joints.to_vec(),
        communities: Some(comm.clone()),
    })
}

/// `m` graphs whose same-label attribute tuples are drawn from `P` (arity `m`).
pub fn gen_collection(n: usize, m: usize, p: &JointDistribution, seed: u64) -> Result<GraphCollection> {
    check_n(n)?;
    if p.arity() != m || m < 2 {
        return Err(Error::InvalidDistribution(format!("need arity m >= 2, got arity {} for m = {m}", p.arity())));
    }
    let mut labelings = vec![Permutation::identity(n)];
    for g in 1..m {
        labelings.push(Permutation::random(n, &mut substream(seed, "sigma", g as u64)));
    }
    let rows = draw_rows(n, std::slice::from_ref(p), |_, _| 0, &mut substream(seed, "edges", 0))?;
    let graphs = assemble(n, p.alphabets(), &labelings, &rows)?;
    Ok(GraphCollection { graphs, labelings, joint: p.clone() })
}

/// CER pair plus `lambda` uniformly chosen seed vertices of `g2` with revealed labels.
pub fn gen_seeded(n: usize, p: &JointDistribution, lambda: usize, seed: u64) -> Result<SeededPair> {
    if lambda > n {
        return Err(Error::InvalidParameter(format!("seed count {lambda} exceeds n = {n}")));
    }
    let pair = gen_cper(n, p, seed)?;
    let mut seeds = sample(&mut substream(seed, "seeds", 0), n, lambda).into_vec();
    seeds.sort_unstable();
    let inv1 = pair.sigma1.inverse();
    let reverse_seeds = seeds.iter().map(|&v| inv1.apply(pair.sigma2.apply(v))).collect();
    Ok(SeededPair { pair, seeds, reverse_seeds })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthFile {
    pub sigma2: Vec<usize>,
    #[serde(default)]
    pub seeds: Vec<usize>,
    /// Hidden labelings of graphs `2..m` of a collection.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hidden: Vec<Vec<usize>>,
    /// Community of every vertex of `g1` and of `g2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub communities: Option<[Vec<usize>; 2]>,
}

/// Writes `g1.json`, `g2.json` and `truth.json` into `dir`; community
/// memberships, when present, are stored per vertex of each graph.
pub fn write_instance(dir: &Path, pair: &CorrelatedPair, seeds: &[usize]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    pair.g1.write(&dir.join("g1.json"))?;
    pair.g2.write(&dir.join("g2.json"))?;
    let communities = match &pair.communities {
        Some(c) => Some([
            c.relabel(&pair.sigma1.inverse())?.membership().to_vec(),
            c.relabel(&pair.sigma2.inverse())?.membership().to_vec(),
        ]),
        None => None,
    };
    let truth =
        TruthFile { sigma2: pair.sigma2.images().to_vec(), seeds: seeds.to_vec(), hidden: Vec::new(), communities };
    std::fs::write(dir.join("truth.json"), serde_json::to_string(&truth)?)?;
    Ok(())
}
