//! Block screening. An edge `(i, j)` can be dropped when
//! `n ⊙ S_ij / γ ∈ ∂f(0)`; the connected components of the surviving
//! edges are solved independently and stitched back together with zero
//! cross-block entries.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matcore::SymMatrix;
use crate::objective::{CovarianceSet, Hyperparams, PrecisionSet};

/// Blocks `A_1 … A_M` partitioning `0..p`, plus the adjacency they came from.
#[derive(Clone, Debug, PartialEq)]
pub struct ScreeningPartition {
    pub blocks: Vec<Vec<usize>>,
    pub adjacency: SymMatrix<bool>,
}

impl ScreeningPartition {
    pub fn p(&self) -> usize {
        self.adjacency.dim()
    }

    /// A single block holding every variable.
    pub fn trivial(p: usize) -> Self {
        ScreeningPartition {
            blocks: vec![(0..p).collect()],
            adjacency: SymMatrix::from_fn(p, |i, j| i != j),
        }
    }

    /// Block id of each variable.
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.p()];
        for (m, block) in self.blocks.iter().enumerate() {
            for &i in block {
                labels[i] = m;
            }
        }
        labels
    }

    /// Number of pairs `i < j` that fall in different blocks and are
    /// therefore fixed at zero.
    pub fn edges_screened_out(&self) -> usize {
        let p = self.p();
        let within: usize = self.blocks.iter().map(|b| b.len() * (b.len() - 1) / 2).sum();
        p * (p - 1) / 2 - within
    }

    pub fn summary(&self) -> PartitionSummary {
        PartitionSummary {
            count: self.blocks.len(),
            sizes: self.blocks.iter().map(Vec::len).collect(),
            largest: self.blocks.iter().map(Vec::len).max().unwrap_or(0),
            edges_screened_out: self.edges_screened_out(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartitionSummary {
    pub count: usize,
    pub sizes: Vec<usize>,
    pub largest: usize,
    pub edges_screened_out: usize,
}

/// `C_ij = true` iff the edge survives, i.e. `(n_k S⁽ᵏ⁾_ij / γ)_k ∉ ∂f(0)`.
/// With `γ = 0` nothing can be screened and every pair is connected.
pub fn build_adjacency(cov: &CovarianceSet, hp: &Hyperparams) -> SymMatrix<bool> {
    let p = cov.p();
    if hp.gamma == 0.0 {
        return SymMatrix::from_fn(p, |i, j| i != j);
    }
    let spec = crate::penalty::PenaltySpec::new(hp.nu, cov.k()).expect("validated nu");
    let mut v = vec![0.0; cov.k()];
    SymMatrix::from_fn(p, |i, j| {
        if i == j {
            return false;
        }
        for (k, x) in v.iter_mut().enumerate() {
            *x = cov.n(k) * cov.cov(k).get(i, j) / hp.gamma;
        }
        !spec.in_subgradient_at_zero(&v)
    })
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Connected components, each sorted ascending, ordered by smallest member.
pub fn connected_components(adjacency: &SymMatrix<bool>) -> ScreeningPartition {
    let p = adjacency.dim();
    let mut dsu = DisjointSet::new(p);
    for (i, j, connected) in adjacency.upper_pairs() {
        if connected {
            dsu.union(i, j);
        }
    }
    // Scanning in index order makes each block's first member its minimum,
    // so blocks come out sorted by smallest member.
    let mut block_of_root = vec![usize::MAX; p];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for i in 0..p {
        let root = dsu.find(i);
        if block_of_root[root] == usize::MAX {
            block_of_root[root] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[block_of_root[root]].push(i);
    }
    ScreeningPartition {
        blocks,
        adjacency: adjacency.clone(),
    }
}

/// Screens `cov` at the given penalty level.
pub fn screen(cov: &CovarianceSet, hp: &Hyperparams) -> ScreeningPartition {
    connected_components(&build_adjacency(cov, hp))
}

/// One covariance subproblem per block, restricted to that block's rows and
/// columns.
pub fn split_problem(cov: &CovarianceSet, part: &ScreeningPartition) -> Vec<CovarianceSet> {
    part.blocks.iter().map(|b| cov.restrict(b)).collect()
}

/// Places each block solution on its diagonal block; cross-block entries are
/// exactly zero.
pub fn assemble(part: &ScreeningPartition, blocks: &[PrecisionSet]) -> Result<PrecisionSet> {
    if blocks.len() != part.blocks.len() {
        return Err(Error::Dimension(format!(
            "{} block solutions for {} blocks",
            blocks.len(),
            part.blocks.len()
        )));
    }
    let k = blocks.first().map(PrecisionSet::k).unwrap_or(0);
    for (m, (sol, idx)) in blocks.iter().zip(&part.blocks).enumerate() {
        if sol.p() != idx.len() || sol.k() != k {
            return Err(Error::Dimension(format!(
                "block {m} solution is {}x{} with {} graphs, expected {}x{} with {k}",
                sol.p(),
                sol.p(),
                sol.k(),
                idx.len(),
                idx.len()
            )));
        }
    }
    let p = part.p();
    let mut out = vec![SymMatrix::zeros(p); k];
    for (sol, idx) in blocks.iter().zip(&part.blocks) {
        for (g, target) in out.iter_mut().enumerate() {
            let m = sol.get(g);
            for a in 0..idx.len() {
                for b in a..idx.len() {
                    target.set(idx[a], idx[b], m.get(a, b));
                }
            }
        }
    }
    PrecisionSet::new(out)
}
