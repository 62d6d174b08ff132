//! Undirected attributed graphs, upper-triangle extraction and community views.
//!
//! Every unordered vertex pair carries exactly one attribute in `[0, l)`;
//! attribute 0 is an ordinary symbol, not "absent".

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::{ut_index, Labeling};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributedGraph {
    n: usize,
    l: usize,
    /// Dense symmetric `n × n` table; the diagonal is unused and kept at 0.
    attr: Vec<u8>,
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    n: usize,
    l: usize,
    edges: Vec<(usize, usize, usize)>,
}

impl AttributedGraph {
    /// All pairs carry attribute 0.
    pub fn empty(n: usize, l: usize) -> Result<Self> {
        if !(2..=256).contains(&l) {
            return Err(Error::InvalidGraph(format!("alphabet size {l} outside [2, 256]")));
        }
        Ok(AttributedGraph { n, l, attr: vec![0; n * n] })
    }

    /// Pairs not listed default to attribute 0.
    pub fn from_edges(n: usize, l: usize, edges: &[(usize, usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(n, l)?;
        for &(u, v, a) in edges {
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at {u}")));
            }
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!("edge ({u}, {v}) outside [0, {n})")));
            }
            g.set(u, v, a)?;
        }
        Ok(g)
    }

    /// Builds from a function evaluated once per pair `u < v`.
    pub fn from_fn(n: usize, l: usize, mut f: impl FnMut(usize, usize) -> usize) -> Result<Self> {
        let mut g = Self::empty(n, l)?;
        for u in 0..n {
            for v in u + 1..n {
                g.set(u, v, f(u, v))?;
            }
        }
        Ok(g)
    }

    pub fn set(&mut self, u: usize, v: usize, a: usize) -> Result<()> {
        if a >= self.l {
            return Err(Error::SymbolOutOfRange { symbol: a, size: self.l });
        }
        if u == v {
            return Err(Error::InvalidGraph(format!("self-loop at {u}")));
        }
        self.attr[u * self.n + v] = a as u8;
        self.attr[v * self.n + u] = a as u8;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> usize {
        self.l
    }

    /// Attribute of the pair `{u, v}`; `u != v`.
    #[inline]
    pub fn attr(&self, u: usize, v: usize) -> u8 {
        debug_assert!(u != v);
        self.attr[u * self.n + v]
    }

    /// Row of the dense table; entry `u` itself is meaningless.
    #[inline]
    pub fn row(&self, u: usize) -> &[u8] {
        &self.attr[u * self.n..(u + 1) * self.n]
    }

    /// Vertex `v` of the result is vertex `π⁻¹(v)` of `self`.
    pub fn relabel(&self, pi: &Labeling) -> Result<Self> {
        check_len(self.n, pi.len())?;
        let inv = pi.inverse();
        let mut out = Self::empty(self.n, self.l)?;
        for u in 0..self.n {
            for v in u + 1..self.n {
                out.set(u, v, self.attr(inv.apply(u), inv.apply(v)) as usize)?;
            }
        }
        Ok(out)
    }

    pub fn edges(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.n {
            for v in u + 1..self.n {
                let a = self.attr(u, v);
                if a != 0 {
                    out.push((u, v, a as usize));
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&GraphFile { n: self.n, l: self.l, edges: self.edges() })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: GraphFile = serde_json::from_str(s)?;
        for &(u, v, _) in &f.edges {
            if u >= v {
                return Err(Error::InvalidGraph(format!("edge ({u}, {v}) must have u < v")));
            }
        }
        Self::from_edges(f.n, f.l, &f.edges)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::LengthMismatch { expected, got });
    }
    Ok(())
}

/// Attribute sequence of a graph in label space, row-major over `i < j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UpperTriangle {
    pub n: usize,
    pub l: usize,
    pub seq: Vec<u8>,
}

/// Entry at `(i, j)` is the attribute between `σ⁻¹(i)` and `σ⁻¹(j)`.
pub fn upper_triangle(g: &AttributedGraph, sigma: &Labeling) -> Result<UpperTriangle> {
    check_len(g.n(), sigma.len())?;
    let n = g.n();
    let inv = sigma.inverse();
    let mut seq = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            seq.push(g.attr(inv.apply(i), inv.apply(j)));
        }
    }
    debug_assert!(n < 2 || seq.len() == ut_index(n, n - 2, n - 1) + 1);
    Ok(UpperTriangle { n, l: g.l(), seq })
}

/// Vertex partition into `c` nonempty communities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommunityStructure {
    membership: Vec<usize>,
    sizes: Vec<usize>,
}

impl CommunityStructure {
    pub fn new(membership: Vec<usize>) -> Result<Self> {
        let c = membership.iter().max().map_or(0, |m| m + 1);
        let mut sizes = vec![0; c];
        for &m in &membership {
            sizes[m] += 1;
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidGraph("empty community".into()));
        }
        Ok(CommunityStructure { membership, sizes })
    }

    /// Consecutive vertex ranges of the given sizes.
    pub fn contiguous(sizes: &[usize]) -> Result<Self> {
        let membership = sizes.iter().enumerate().flat_map(|(c, &s)| std::iter::repeat_n(c, s)).collect();
        Self::new(membership)
    }

    pub fn c(&self) -> usize {
        self.sizes.len()
    }

    pub fn n(&self) -> usize {
        self.membership.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn membership(&self) -> &[usize] {
        &self.membership
    }

    pub fn of(&self, v: usize) -> usize {
        self.membership[v]
    }

    /// Members of each community in ascending order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.c()];
        for (v, &m) in self.membership.iter().enumerate() {
            out[m].push(v);
        }
        out
    }

    /// Membership expressed in label space under `σ`.
    pub fn relabel(&self, sigma: &Labeling) -> Result<Self> {
        check_len(self.n(), sigma.len())?;
        let mut membership = vec![0; self.n()];
        for (v, &m) in self.membership.iter().enumerate() {
            membership[sigma.apply(v)] = m;
        }
        Self::new(membership)
    }

    /// Block index of the community pair `(a, b)`, `a <= b`, ordered
    /// `(0,0), (0,1), ..., (0,c-1), (1,1), ...`.
    pub fn block_index(&self, a: usize, b: usize) -> usize {
        block_index(self.c(), a, b)
    }

    pub fn block_count(&self) -> usize {
        self.c() * (self.c() + 1) / 2
    }
}

/// Index of the unordered community pair `{a, b}` among `c` communities,
/// ordered `(0,0), (0,1), ..., (0,c-1), (1,1), ...`.
pub fn block_index(c: usize, a: usize, b: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    a * c - a * (a + 1) / 2 + b
}

/// Per community pair `(a, b)`, `a <= b`, in [`CommunityStructure::block_index`] order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockView {
    pub a: usize,
    pub b: usize,
    pub seq: Vec<u8>,
}

/// Block sequences under `σ`, with communities given in label space.
///
/// Cross blocks list `(i, j)` row-major over `i ∈ C_a, j ∈ C_b`; within
/// blocks list `i < j` row-major. Blocks partition the upper triangle.
pub fn block_views(g: &AttributedGraph, sigma: &Labeling, comm: &CommunityStructure) -> Result<Vec<BlockView>> {
    check_len(g.n(), sigma.len())?;
    check_len(g.n(), comm.n())?;
    let inv = sigma.inverse();
    let members = comm.members();
    let c = comm.c();
    let mut out = Vec::with_capacity(comm.block_count());
    for a in 0..c {
        for b in a..c {
            let mut seq = Vec::new();
            for (x, &i) in members[a].iter().enumerate() {
                let js: &[usize] = if a == b { &members[b][x + 1..] } else { &members[b] };
                for &j in js {
                    seq.push(g.attr(inv.apply(i), inv.apply(j)));
                }
            }
            out.push(BlockView { a, b, seq });
        }
    }
    Ok(out)
}

/// Fraction of positions where the two labelings agree.
pub fn accuracy(truth: &Labeling, estimate: &Labeling) -> Result<f64> {
    check_len(truth.len(), estimate.len())?;
    if truth.is_empty() {
        return Ok(1.0);
    }
    let hits = truth.images().iter().zip(estimate.images()).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::Permutation;

    fn sample_graph() -> AttributedGraph {
        AttributedGraph::from_fn(4, 3, |u, v| (u * 7 + v * 3) % 3).unwrap()
    }

    #[test]
    fn ut_length_and_constant_graph() {
        let g = AttributedGraph::from_fn(3, 2, |_, _| 1).unwrap();
        assert_eq!(upper_triangle(&g, &Permutation::identity(3)).unwrap().seq.len(), 3);
        let z = AttributedGraph::empty(5, 2).unwrap();
        let s = Permutation::from_cycles(5, &[vec![0, 3, 1]]).unwrap();
        assert!(upper_triangle(&z, &s).unwrap().seq.iter().all(|&a| a == 0));
    }

    #[test]
    fn ut_respects_labeling() {
        let g = sample_graph();
        let s = Permutation::from_images(vec![2, 0, 3, 1]).unwrap();
        let u = upper_triangle(&g, &s).unwrap();
        let inv = s.inverse();
        for i in 0..4 {
            for j in i + 1..4 {
                assert_eq!(u.seq[ut_index(4, i, j)], g.attr(inv.apply(i), inv.apply(j)));
            }
        }
    }

    #[test]
    fn transposition_permutes_ut() {
        let g = sample_graph();
        let a = upper_triangle(&g, &Permutation::identity(4)).unwrap();
        let b = upper_triangle(&g, &Permutation::from_cycles(4, &[vec![1, 2]]).unwrap()).unwrap();
        let (mut x, mut y) = (a.seq.clone(), b.seq.clone());
        x.sort();
        y.sort();
        assert_eq!(x, y);
    }

    #[test]
    fn relabel_matches_ut() {
        let g = sample_graph();
        let s = Permutation::from_images(vec![3, 1, 0, 2]).unwrap();
        let h = g.relabel(&s).unwrap();
        assert_eq!(upper_triangle(&h, &Permutation::identity(4)).unwrap(), upper_triangle(&g, &s).unwrap());
    }

    #[test]
    fn json_round_trip() {
        let g = sample_graph();
        let back = AttributedGraph::from_json(&g.to_json().unwrap()).unwrap();
        assert_eq!(g, back);
        assert!(AttributedGraph::from_json(r#"{"n":3,"l":2,"edges":[[1,0,1]]}"#).is_err());
        assert!(AttributedGraph::from_json(r#"{"n":3,"l":2,"edges":[[0,1,2]]}"#).is_err());
    }

    #[test]
    fn block_lengths() {
        let g = AttributedGraph::from_fn(4, 2, |u, v| (u + v) % 2).unwrap();
        let comm = CommunityStructure::contiguous(&[2, 2]).unwrap();
        let lens: Vec<usize> =
            block_views(&g, &Permutation::identity(4), &comm).unwrap().iter().map(|b| b.seq.len()).collect();
        assert_eq!(lens, vec![1, 4, 1]);
        let one = CommunityStructure::contiguous(&[4]).unwrap();
        let s = Permutation::from_images(vec![1, 3, 0, 2]).unwrap();
        assert_eq!(block_views(&g, &s, &one).unwrap()[0].seq, upper_triangle(&g, &s).unwrap().seq);
    }

    #[test]
    fn block_index_order() {
        let comm = CommunityStructure::contiguous(&[1, 1, 1]).unwrap();
        let idx: Vec<usize> =
            [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)].iter().map(|&(a, b)| comm.block_index(a, b)).collect();
        assert_eq!(idx, vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(comm.block_index(2, 1), 4);
    }

    #[test]
    fn accuracy_examples() {
        let t = Permutation::from_images(vec![4, 2, 0, 1, 3]).unwrap();
        assert_eq!(accuracy(&t, &t).unwrap(), 1.0);
        let d = Permutation::from_cycles(5, &[vec![0, 1, 2, 3, 4]]).unwrap();
        assert_eq!(accuracy(&t, &d.compose(&t).unwrap()).unwrap(), 0.0);
        let e = Permutation::from_cycles(5, &[vec![0, 1, 2]]).unwrap().compose(&t).unwrap();
        assert!((accuracy(&t, &e).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_communities() {
        assert!(CommunityStructure::new(vec![0, 2, 2]).is_err());
        assert!(AttributedGraph::empty(3, 1).is_err());
    }
}
