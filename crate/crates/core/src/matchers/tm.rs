use std::collections::BTreeSet;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{MatchReport, Outcome};
use crate::error::{Error, Result};
use crate::generators::{CorrelatedPair, GraphCollection};
use crate::graph::{AttributedGraph, CommunityStructure};
use crate::perm::{factorial, Labeling};
use crate::rng::{substream, StreamRng};
use crate::typicality::{JointDistribution, TypicalBox};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TmConfig {
    /// Typicality tolerance; `None` uses [`default_tm_eps`].
    pub eps: Option<f64>,
    /// Seed for the uniform draw from the accepted set.
    pub seed: u64,
    /// Largest admissible number of candidate labelings.
    pub limit: f64,
    /// Keep every accepted candidate in the report.
    pub keep_members: bool,
}

impl Default for TmConfig {
    fn default() -> Self {
        TmConfig { eps: None, seed: 0, limit: 362_880.0, keep_members: false }
    }
}

/// `N^{-0.9}` for upper triangles of length `N = n(n-1)/2`.
pub fn default_tm_eps(n: usize) -> f64 {
    let len = (n * n.saturating_sub(1) / 2).max(1) as f64;
    len.powf(-0.9)
}

/// Depth-first search over label-to-vertex assignments for the hidden
/// graphs, pruning on per-block count windows.
struct Engine<'a> {
    n: usize,
    graphs: Vec<&'a AttributedGraph>,
    /// `allowed[r][i * n + w]`: label `i` may sit on vertex `w` of graph `r`.
    allowed: Vec<Vec<bool>>,
    block: Vec<usize>,
    cells: usize,
    strides: Vec<usize>,
    lo: Vec<i64>,
    hi: Vec<i64>,
    /// Truth vertex of each label per graph.
    truth: Option<Vec<Vec<usize>>>,
    counts: Vec<i64>,
    remaining: Vec<i64>,
    /// `assign[r][i]`: vertex of graph `r` holding label `i`; row 0 is fixed.
    assign: Vec<Vec<usize>>,
    used: Vec<Vec<bool>>,
    rng: StreamRng,
    found: Found,
}

#[derive(Default)]
struct Found {
    accepted: u64,
    truth_in: bool,
    sum_acc: f64,
    min_acc: f64,
    pick: Option<Vec<Vec<usize>>>,
    members: Option<Vec<Vec<Vec<usize>>>>,
}

struct Spec<'a> {
    graphs: Vec<&'a AttributedGraph>,
    /// Vertex of graph 0 carrying each label.
    fixed: Vec<usize>,
    /// Community of each label and of each vertex of each graph (same length as graphs).
    communities: Option<(Vec<usize>, Vec<Vec<usize>>)>,
    /// Joint per block; one block without communities.
    joints: Vec<JointDistribution>,
    truth: Option<Vec<Vec<usize>>>,
    eps: f64,
    seed: u64,
    keep_members: bool,
}

impl<'a> Engine<'a> {
    fn new(spec: Spec<'a>) -> Result<Self> {
        let n = spec.fixed.len();
        let m = spec.graphs.len();
        let alphabets = spec.joints[0].alphabets().to_vec();
        if alphabets.len() != m {
            return Err(Error::InvalidDistribution(format!("joint arity {} for {m} graphs", alphabets.len())));
        }
        for (g, &a) in spec.graphs.iter().zip(&alphabets) {
            if g.n() != n {
                return Err(Error::LengthMismatch { expected: n, got: g.n() });
            }
            if (0..n).any(|u| (u + 1..n).any(|v| g.attr(u, v) as usize >= a)) {
                return Err(Error::SymbolOutOfRange { symbol: g.l() - 1, size: a });
            }
        }
        let cells: usize = alphabets.iter().product();
        let mut strides = vec![1; m];
        for r in (0..m.saturating_sub(1)).rev() {
            strides[r] = strides[r + 1] * alphabets[r + 1];
        }
        let (block, nblocks, allowed) = match &spec.communities {
            None => (vec![0; n * n], 1, vec![vec![true; n * n]; m]),
            Some((labels, verts)) => {
                let c = labels.iter().chain(verts.iter().flatten()).max().map_or(0, |v| v + 1);
                let bi = |a: usize, b: usize| {
                    let (a, b) = if a <= b { (a, b) } else { (b, a) };
                    a * c - a * (a + 1) / 2 + a + (b - a)
                };
                let mut block = vec![0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        block[i * n + j] = bi(labels[i], labels[j]);
                    }
                }
                let allowed = verts.iter().map(|vc| (0..n * n).map(|k| labels[k / n] == vc[k % n]).collect()).collect();
                (block, c * (c + 1) / 2, allowed)
            }
        };
        if spec.joints.len() != nblocks {
            return Err(Error::InvalidParameter(format!("expected {nblocks} block joints, got {}", spec.joints.len())));
        }
        let mut lens = vec![0i64; nblocks];
        for i in 0..n {
            for j in i + 1..n {
                lens[block[i * n + j]] += 1;
            }
        }
        let mut lo = Vec::with_capacity(nblocks * cells);
        let mut hi = Vec::with_capacity(nblocks * cells);
        for (b, joint) in spec.joints.iter().enumerate() {
            if joint.alphabets() != alphabets {
                return Err(Error::InvalidDistribution("block joints must share alphabets".into()));
            }
            let bx = TypicalBox::new(joint, spec.eps, lens[b] as usize);
            if lens[b] == 0 {
                lo.extend(std::iter::repeat_n(0, cells));
                hi.extend(std::iter::repeat_n(0, cells));
            } else {
                lo.extend(bx.lo);
                hi.extend(bx.hi);
            }
        }
        let mut assign = vec![vec![usize::MAX; n]; m];
        assign[0] = spec.fixed;
        Ok(Engine {
            n,
            graphs: spec.graphs,
            allowed,
            block,
            cells,
            strides,
            lo,
            hi,
            truth: spec.truth,
            counts: vec![0; nblocks * cells],
            remaining: lens,
            assign,
            used: vec![vec![false; n]; m],
            rng: substream(spec.seed, "tm-pick", 0),
            found: Found { min_acc: f64::INFINITY, members: spec.keep_members.then(Vec::new), ..Found::default() },
        })
    }

    fn run(mut self) -> Found {
        if self.n == 0 || self.graphs.len() == 1 {
            self.leaf();
        } else {
            self.dfs(0, 1);
        }
        self.found
    }

    fn dfs(&mut self, i: usize, r: usize) {
        if i == self.n {
            self.leaf();
            return;
        }
        let n = self.n;
        for w in 0..n {
            if self.used[r][w] || !self.allowed[r][i * n + w] {
                continue;
            }
            self.assign[r][i] = w;
            self.used[r][w] = true;
            if r + 1 < self.graphs.len() {
                self.dfs(i, r + 1);
            } else {
                if self.extend(i) {
                    self.dfs(i + 1, 1);
                }
                self.retract(i);
            }
            self.used[r][w] = false;
        }
    }

    #[inline]
    fn cell(&self, j: usize, i: usize) -> usize {
        let mut c = 0;
        for (r, g) in self.graphs.iter().enumerate() {
            c += self.strides[r] * g.attr(self.assign[r][j], self.assign[r][i]) as usize;
        }
        c
    }

    /// Adds the pairs `(j, i)`, `j < i`; false if the partial counts can no
    /// longer complete to a typical type.
    fn extend(&mut self, i: usize) -> bool {
        let mut ok = true;
        for j in 0..i {
            let b = self.block[j * self.n + i];
            let k = b * self.cells + self.cell(j, i);
            self.counts[k] += 1;
            self.remaining[b] -= 1;
            ok &= self.counts[k] <= self.hi[k];
        }
        ok && self.completable()
    }

    fn retract(&mut self, i: usize) {
        for j in 0..i {
            let b = self.block[j * self.n + i];
            let k = b * self.cells + self.cell(j, i);
            self.counts[k] -= 1;
            self.remaining[b] += 1;
        }
    }

    fn completable(&self) -> bool {
        self.remaining.iter().enumerate().all(|(b, &rem)| {
            let base = b * self.cells;
            let deficit: i64 = (base..base + self.cells).map(|k| (self.lo[k] - self.counts[k]).max(0)).sum();
            deficit <= rem
        })
    }

    fn leaf(&mut self) {
        let f = &mut self.found;
        f.accepted += 1;
        if let Some(truth) = &self.truth {
            let hits: usize =
                truth.iter().zip(&self.assign[1..]).map(|(t, a)| t.iter().zip(a).filter(|(x, y)| x == y).count()).sum();
            let total = truth.len() * self.n;
            let acc = if total == 0 { 1.0 } else { hits as f64 / total as f64 };
            f.truth_in |= hits == total;
            f.sum_acc += acc;
            f.min_acc = f.min_acc.min(acc);
        }
        let take = self.rng.gen_range(0..f.accepted) == 0;
        if take || f.members.is_some() {
            let labelings = self.labelings();
            let f = &mut self.found;
            if let Some(ms) = f.members.as_mut() {
                ms.push(labelings.clone());
            }
            if take {
                f.pick = Some(labelings);
            }
        }
    }

    /// Vertex → label images for each hidden graph.
    fn labelings(&self) -> Vec<Vec<usize>> {
        self.assign[1..]
            .iter()
            .map(|a| {
                let mut img = vec![0; self.n];
                for (label, &v) in a.iter().enumerate() {
                    img[v] = label;
                }
                img
            })
            .collect()
    }
}

fn check_guard(candidates: f64, limit: f64) -> Result<()> {
    if candidates > limit {
        return Err(Error::TooLarge(format!("{candidates:.3e} candidate labelings exceed the limit {limit:.3e}")));
    }
    Ok(())
}

fn fact(n: usize) -> f64 {
    crate::perm::big_log2(&factorial(n)).exp2()
}

fn accuracy_of(images: &[usize], truth: &Labeling) -> f64 {
    let hits = images.iter().zip(truth.images()).filter(|(a, b)| a == b).count();
    if images.is_empty() {
        1.0
    } else {
        hits as f64 / images.len() as f64
    }
}

/// Truth vertex of each label under `sigma`.
fn truth_rows(truth: Option<&[Labeling]>) -> Option<Vec<Vec<usize>>> {
    truth.map(|ts| ts.iter().map(|t| t.inverse().images().to_vec()).collect())
}

fn report(
    model: &str,
    n: usize,
    eps: f64,
    seed: u64,
    found: Found,
    truth: Option<&[Labeling]>,
    start: Instant,
) -> MatchReport {
    let outcome = if found.pick.is_some() { Outcome::Matched } else { Outcome::NoTypicalLabeling };
    let labelings = found.pick.unwrap_or_default();
    let accuracy = truth
        .filter(|_| !labelings.is_empty())
        .map(|ts| ts.iter().zip(&labelings).map(|(t, l)| accuracy_of(l, t)).sum::<f64>() / ts.len() as f64);
    let has_stats = truth.is_some() && found.accepted > 0;
    MatchReport {
        model: model.to_string(),
        n,
        outcome,
        labelings,
        ambiguity_size: found.accepted,
        eps,
        seed,
        accuracy,
        truth_in_set: truth.map(|_| found.truth_in),
        mean_set_accuracy: has_stats.then(|| found.sum_acc / found.accepted as f64),
        min_set_accuracy: has_stats.then_some(found.min_acc),
        members: found.members,
        stm: None,
        wall_time_s: start.elapsed().as_secs_f64(),
    }
}

/// Exhaustive typicality matching of `g2` against `g1` under the edge law `P`.
pub fn tm_match_graphs(
    g1: &AttributedGraph,
    sigma1: &Labeling,
    g2: &AttributedGraph,
    p: &JointDistribution,
    truth: Option<&Labeling>,
    cfg: &TmConfig,
) -> Result<MatchReport> {
    let start = Instant::now();
    let n = g1.n();
    check_guard(fact(n), cfg.limit)?;
    let eps = cfg.eps.unwrap_or_else(|| default_tm_eps(n));
    let truth: Option<Vec<Labeling>> = truth.map(|t| vec![t.clone()]);
    let spec = Spec {
        graphs: vec![g1, g2],
        fixed: sigma1.inverse().images().to_vec(),
        communities: None,
        joints: vec![p.clone()],
        truth: truth_rows(truth.as_deref()),
        eps,
        seed: cfg.seed,
        keep_members: cfg.keep_members,
    };
    let found = Engine::new(spec)?.run();
    Ok(report("cer", n, eps, cfg.seed, found, truth.as_deref(), start))
}

pub fn tm_match_exhaustive(pair: &CorrelatedPair, cfg: &TmConfig) -> Result<MatchReport> {
    tm_match_graphs(&pair.g1, &pair.sigma1, &pair.g2, &pair.joints[0], Some(&pair.sigma2), cfg)
}

/// Typicality matching restricted to community-preserving labelings, with
/// each community block tested against its own joint.
///
/// `comm1` and `comm2` give the community of every vertex of `g1` and `g2`.
#[allow(clippy::too_many_arguments)]
pub fn tm_match_sbm_graphs(
    g1: &AttributedGraph,
    sigma1: &Labeling,
    comm1: &CommunityStructure,
    g2: &AttributedGraph,
    comm2: &CommunityStructure,
    joints: &[JointDistribution],
    truth: Option<&Labeling>,
    cfg: &TmConfig,
) -> Result<MatchReport> {
    let start = Instant::now();
    let n = g1.n();
    let (found, eps) = sbm_search(g1, sigma1, comm1.membership(), g2, comm2.membership(), joints, truth, cfg)?;
    let truth: Option<Vec<Labeling>> = truth.map(|t| vec![t.clone()]);
    Ok(report("sbm", n, eps, cfg.seed, found, truth.as_deref(), start))
}

#[allow(clippy::too_many_arguments)]
fn sbm_search(
    g1: &AttributedGraph,
    sigma1: &Labeling,
    memb1: &[usize],
    g2: &AttributedGraph,
    memb2: &[usize],
    joints: &[JointDistribution],
    truth: Option<&Labeling>,
    cfg: &TmConfig,
) -> Result<(Found, f64)> {
    let n = g1.n();
    if memb1.len() != n || memb2.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: memb1.len().min(memb2.len()) });
    }
    let c = memb1.iter().max().map_or(0, |v| v + 1);
    let mut sizes = vec![0usize; c];
    memb1.iter().for_each(|&v| sizes[v] += 1);
    check_guard(sizes.iter().map(|&s| fact(s)).product(), cfg.limit)?;
    let eps = cfg.eps.unwrap_or_else(|| default_tm_eps(n));
    let fixed = sigma1.inverse().images().to_vec();
    let labels: Vec<usize> = fixed.iter().map(|&v| memb1[v]).collect();
    let truth: Option<Vec<Labeling>> = truth.map(|t| vec![t.clone()]);
    let spec = Spec {
        graphs: vec![g1, g2],
        fixed,
        communities: Some((labels, vec![memb1.to_vec(), memb2.to_vec()])),
        joints: joints.to_vec(),
        truth: truth_rows(truth.as_deref()),
        eps,
        seed: cfg.seed,
        keep_members: cfg.keep_members,
    };
    Ok((Engine::new(spec)?.run(), eps))
}

/// Uses the pair's community structure (given per label) as side information.
pub fn tm_match_sbm(pair: &CorrelatedPair, cfg: &TmConfig) -> Result<MatchReport> {
    let comm =
        pair.communities.as_ref().ok_or_else(|| Error::InvalidParameter("pair has no community structure".into()))?;
    let comm1 = comm.relabel(&pair.sigma1.inverse())?;
    let comm2 = comm.relabel(&pair.sigma2.inverse())?;
    tm_match_sbm_graphs(&pair.g1, &pair.sigma1, &comm1, &pair.g2, &comm2, &pair.joints, Some(&pair.sigma2), cfg)
}

/// Every assignment of `n` vertices to communities with the given sizes.
fn assignments(n: usize, sizes: &[usize]) -> Vec<Vec<usize>> {
    fn rec(v: usize, left: &mut [usize], cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if v == cur.capacity() {
            out.push(cur.clone());
            return;
        }
        for c in 0..left.len() {
            if left[c] > 0 {
                left[c] -= 1;
                cur.push(c);
                rec(v + 1, left, cur, out);
                cur.pop();
                left[c] += 1;
            }
        }
    }
    let mut out = Vec::new();
    let mut left = sizes.to_vec();
    rec(0, &mut left, &mut Vec::with_capacity(n), &mut out);
    out
}

/// Community-blind matching: the union of the accepted sets over every
/// membership assignment of both graphs consistent with `sizes`.
pub fn tm_match_sbm_blind_graphs(
    g1: &AttributedGraph,
    sigma1: &Labeling,
    g2: &AttributedGraph,
    sizes: &[usize],
    joints: &[JointDistribution],
    truth: Option<&Labeling>,
    cfg: &TmConfig,
) -> Result<MatchReport> {
    let start = Instant::now();
    let n = g1.n();
    if sizes.iter().sum::<usize>() != n || sizes.contains(&0) {
        return Err(Error::InvalidParameter(format!("community sizes {sizes:?} do not partition {n} vertices")));
    }
    let assigns = assignments(n, sizes);
    let per: f64 = sizes.iter().map(|&s| fact(s)).product();
    check_guard(per * (assigns.len() as f64).powi(2), cfg.limit * 200.0)?;
    let inner = TmConfig { keep_members: true, limit: f64::INFINITY, ..*cfg };
    let mut union: BTreeSet<Vec<Vec<usize>>> = BTreeSet::new();
    let mut eps = 0.0;
    for a1 in &assigns {
        for a2 in &assigns {
            let (found, e) = sbm_search(g1, sigma1, a1, g2, a2, joints, None, &inner)?;
            eps = e;
            union.extend(found.members.unwrap_or_default());
        }
    }
    let members: Vec<Vec<Vec<usize>>> = union.into_iter().collect();
    let mut found = Found { accepted: members.len() as u64, min_acc: f64::INFINITY, ..Found::default() };
    if let Some(t) = truth {
        for m in &members {
            let acc = accuracy_of(&m[0], t);
            found.truth_in |= acc == 1.0;
            found.sum_acc += acc;
            found.min_acc = found.min_acc.min(acc);
        }
    }
    if !members.is_empty() {
        let k = substream(cfg.seed, "tm-pick", 0).gen_range(0..members.len());
        found.pick = Some(members[k].clone());
    }
    found.members = cfg.keep_members.then_some(members);
    let truth: Option<Vec<Labeling>> = truth.map(|t| vec![t.clone()]);
    Ok(report("sbm-blind", n, eps, cfg.seed, found, truth.as_deref(), start))
}

pub fn tm_match_sbm_blind(pair: &CorrelatedPair, sizes: &[usize], cfg: &TmConfig) -> Result<MatchReport> {
    tm_match_sbm_blind_graphs(&pair.g1, &pair.sigma1, &pair.g2, sizes, &pair.joints, Some(&pair.sigma2), cfg)
}

/// Joint typicality matching of graphs `2..m` against the revealed first graph.
pub fn tm_match_collection_graphs(
    graphs: &[AttributedGraph],
    sigma1: &Labeling,
    p: &JointDistribution,
    truth: Option<&[Labeling]>,
    cfg: &TmConfig,
) -> Result<MatchReport> {
    let start = Instant::now();
    let m = graphs.len();
    if m < 2 {
        return Err(Error::InvalidParameter("need at least two graphs".into()));
    }
    let n = graphs[0].n();
    check_guard(fact(n).powi(m as i32 - 1), cfg.limit)?;
    let eps = cfg.eps.unwrap_or_else(|| default_tm_eps(n));
    let spec = Spec {
        graphs: graphs.iter().collect(),
        fixed: sigma1.inverse().images().to_vec(),
        communities: None,
        joints: vec![p.clone()],
        truth: truth_rows(truth),
        eps,
        seed: cfg.seed,
        keep_members: cfg.keep_members,
    };
    let found = Engine::new(spec)?.run();
    Ok(report("collection", n, eps, cfg.seed, found, truth, start))
}

pub fn tm_match_collection(coll: &GraphCollection, cfg: &TmConfig) -> Result<MatchReport> {
    tm_match_collection_graphs(&coll.graphs, &coll.labelings[0], &coll.joint, Some(&coll.labelings[1..]), cfg)
}
