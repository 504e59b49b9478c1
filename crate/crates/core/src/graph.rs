//! Directed communication topologies and column-stochastic mixing weights.
//!
//! Edge orientation follows the receiver-first convention: the pair `(i, j)`
//! means agent `j` sends to agent `i`, so `j` is an in-neighbor of `i`.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default number of Erdos-Renyi draws before giving up on strong connectivity.
pub const DEFAULT_MAX_ATTEMPTS: u32 = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("graph needs at least {min} nodes, got {n}")]
    TooFewNodes { n: usize, min: usize },
    #[error("connection probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("edge ({i}, {j}) is invalid for a graph with {n} nodes")]
    InvalidEdge { i: usize, j: usize, n: usize },
    #[error("no strongly connected draw within {attempts} attempts")]
    RetriesExhausted { attempts: u32 },
    #[error("graph is not strongly connected")]
    NotStronglyConnected,
    #[error("weight matrix violates column-stochasticity: {0}")]
    InvalidWeights(String),
}

/// A directed graph without self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    n: usize,
    in_nbrs: Vec<Vec<usize>>,
    out_nbrs: Vec<Vec<usize>>,
}

impl Digraph {
    /// Builds a graph from `(i, j)` pairs, each meaning an edge `j -> i`.
    /// Duplicate pairs are merged.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::TooFewNodes { n, min: 1 });
        }
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i == j || i >= n || j >= n {
                return Err(GraphError::InvalidEdge { i, j, n });
            }
            set.insert((i, j));
        }
        let mut in_nbrs = vec![Vec::new(); n];
        let mut out_nbrs = vec![Vec::new(); n];
        for &(i, j) in &set {
            in_nbrs[i].push(j);
            out_nbrs[j].push(i);
        }
        Ok(Self { n, in_nbrs, out_nbrs })
    }

    /// Directed cycle `0 -> 1 -> ... -> n-1 -> 0`.
    pub fn cycle(n: usize) -> Result<Self, GraphError> {
        Self::new(n, (0..n).map(|j| ((j + 1) % n, j)))
    }

    /// Complete digraph: every ordered pair of distinct nodes is an edge.
    pub fn complete(n: usize) -> Result<Self, GraphError> {
        Self::new(n, (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// In-neighborhood of `i`, excluding `i` itself, in ascending order.
    pub fn in_neighbors(&self, i: usize) -> &[usize] {
        &self.in_nbrs[i]
    }

    pub fn out_neighbors(&self, j: usize) -> &[usize] {
        &self.out_nbrs[j]
    }

    pub fn out_degree(&self, j: usize) -> usize {
        self.out_nbrs[j].len()
    }

    pub fn edge_count(&self) -> usize {
        self.in_nbrs.iter().map(Vec::len).sum()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.in_nbrs.get(i).is_some_and(|nb| nb.binary_search(&j).is_ok())
    }

    /// All edges as `(i, j)` pairs in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.in_nbrs
            .iter()
            .enumerate()
            .flat_map(|(i, nb)| nb.iter().map(move |&j| (i, j)))
    }

    /// Samples each ordered pair `(i, j)`, `i != j`, independently with
    /// probability `prob`. Redraws with `seed + 1`, `seed + 2`, ... until the
    /// result is strongly connected or `max_attempts` draws have failed.
    pub fn erdos_renyi_with_attempts(
        n: usize,
        prob: f64,
        seed: u64,
        max_attempts: u32,
    ) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::TooFewNodes { n, min: 2 });
        }
        if !(0.0..=1.0).contains(&prob) {
            return Err(GraphError::InvalidProbability(prob));
        }
        for attempt in 0..max_attempts {
            let mut rng = ChaCha20Rng::seed_from_u64(seed.wrapping_add(u64::from(attempt)));
            let mut edges = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if i != j && rng.random::<f64>() < prob {
                        edges.push((i, j));
                    }
                }
            }
            let g = Self::new(n, edges)?;
            if g.strongly_connected() {
                if attempt > 0 {
                    log::debug!("erdos_renyi: strongly connected draw after {} retries", attempt);
                }
                return Ok(g);
            }
        }
        Err(GraphError::RetriesExhausted { attempts: max_attempts })
    }

    pub fn erdos_renyi(n: usize, prob: f64, seed: u64) -> Result<Self, GraphError> {
        Self::erdos_renyi_with_attempts(n, prob, seed, DEFAULT_MAX_ATTEMPTS)
    }

    fn reach_count(&self, start: usize, forward: bool) -> usize {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            let next = if forward { &self.out_nbrs[u] } else { &self.in_nbrs[u] };
            for &v in next {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count
    }

    /// True iff every node reaches every other node. Forward and reverse
    /// reachability from node 0 suffice.
    pub fn strongly_connected(&self) -> bool {
        self.reach_count(0, true) == self.n && self.reach_count(0, false) == self.n
    }

    /// Hop distances from `src` along edge direction; `usize::MAX` if unreachable.
    pub fn distances_from(&self, src: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n];
        dist[src] = 0;
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for &v in &self.out_nbrs[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Longest shortest directed path over ordered pairs of distinct nodes.
    /// A single-node graph has diameter 0.
    pub fn diameter(&self) -> Result<usize, GraphError> {
        if !self.strongly_connected() {
            return Err(GraphError::NotStronglyConnected);
        }
        Ok((0..self.n)
            .map(|s| self.distances_from(s).into_iter().max().unwrap_or(0))
            .max()
            .unwrap_or(0))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&GraphDoc::from(self)).expect("graph document serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, GraphJsonError> {
        let doc: GraphDoc = serde_json::from_str(s)?;
        Ok(Self::try_from(doc)?)
    }
}

#[derive(Debug, Error)]
pub enum GraphJsonError {
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Serialized form: `{"n": int, "edges": [[i, j], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphDoc {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
}

impl From<&Digraph> for GraphDoc {
    fn from(g: &Digraph) -> Self {
        Self { n: g.n, edges: g.edges().map(|(i, j)| [i, j]).collect() }
    }
}

impl TryFrom<GraphDoc> for Digraph {
    type Error = GraphError;

    fn try_from(doc: GraphDoc) -> Result<Self, GraphError> {
        Digraph::new(doc.n, doc.edges.into_iter().map(|[i, j]| (i, j)))
    }
}

impl Serialize for Digraph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        GraphDoc::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Digraph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = GraphDoc::deserialize(d)?;
        Digraph::try_from(doc).map_err(serde::de::Error::custom)
    }
}

/// Column-stochastic weights `p_ij` with the sparsity pattern of a [`Digraph`]
/// plus a positive diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    p: DMatrix<f64>,
    /// Row-wise off-diagonal support: `(j, p_ij)` for each in-neighbor `j` of `i`.
    rows: Vec<Vec<(usize, f64)>>,
}

impl WeightMatrix {
    /// Each node `j` splits its mass evenly over itself and its out-neighbors:
    /// `p_ij = 1 / (1 + outdeg(j))`. Column `j` depends only on `j`'s out-degree,
    /// so every agent can set its own weights locally.
    pub fn column_stochastic(g: &Digraph) -> Result<Self, GraphError> {
        if !g.strongly_connected() {
            return Err(GraphError::NotStronglyConnected);
        }
        let n = g.n();
        let mut p = DMatrix::zeros(n, n);
        for j in 0..n {
            let share = 1.0 / (1 + g.out_degree(j)) as f64;
            p[(j, j)] = share;
            for &i in g.out_neighbors(j) {
                p[(i, j)] = share;
            }
        }
        Self::from_dense(p)
    }

    /// Wraps an arbitrary dense matrix after checking the weight invariants.
    pub fn from_dense(p: DMatrix<f64>) -> Result<Self, GraphError> {
        let n = p.nrows();
        if p.ncols() != n || n == 0 {
            return Err(GraphError::InvalidWeights(format!("shape {}x{}", p.nrows(), p.ncols())));
        }
        for j in 0..n {
            let col = p.column(j);
            if col.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                return Err(GraphError::InvalidWeights(format!("column {j} has entries outside [0, 1]")));
            }
            let sum: f64 = col.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(GraphError::InvalidWeights(format!("column {j} sums to {sum}")));
            }
            if p[(j, j)] <= 0.0 {
                return Err(GraphError::InvalidWeights(format!("diagonal entry {j} is not positive")));
            }
        }
        let rows = (0..n)
            .map(|i| (0..n).filter(|&j| j != i && p[(i, j)] > 0.0).map(|j| (j, p[(i, j)])).collect())
            .collect();
        Ok(Self { p, rows })
    }

    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[(i, j)]
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.p[(i, i)]
    }

    pub fn dense(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// Off-diagonal nonzeros of row `i` as `(j, p_ij)`, i.e. the weighted
    /// in-neighborhood of `i`.
    pub fn in_weights(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// Whether the support is contained in `g`'s edges plus the diagonal.
    pub fn respects(&self, g: &Digraph) -> bool {
        g.n() == self.n()
            && (0..self.n()).all(|i| self.rows[i].iter().all(|&(j, _)| g.has_edge(i, j)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_nodes_full_probability_is_complete() {
        let g = Digraph::erdos_renyi(2, 1.0, 9).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn empty_probability_exhausts_retries() {
        assert_eq!(
            Digraph::erdos_renyi(3, 0.0, 1),
            Err(GraphError::RetriesExhausted { attempts: DEFAULT_MAX_ATTEMPTS })
        );
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(Digraph::erdos_renyi(1, 0.5, 0), Err(GraphError::TooFewNodes { .. })));
        assert!(matches!(Digraph::erdos_renyi(4, 1.5, 0), Err(GraphError::InvalidProbability(_))));
        assert!(matches!(Digraph::new(3, [(1, 1)]), Err(GraphError::InvalidEdge { .. })));
        assert!(matches!(Digraph::new(3, [(0, 3)]), Err(GraphError::InvalidEdge { .. })));
    }

    #[test]
    fn cycle_and_chain_connectivity() {
        assert!(Digraph::cycle(3).unwrap().strongly_connected());
        // chain 0 -> 1 -> 2
        let chain = Digraph::new(3, [(1, 0), (2, 1)]).unwrap();
        assert!(!chain.strongly_connected());
        assert_eq!(chain.diameter(), Err(GraphError::NotStronglyConnected));
        assert_eq!(WeightMatrix::column_stochastic(&chain), Err(GraphError::NotStronglyConnected));
    }

    #[test]
    fn diameters_of_named_graphs() {
        assert_eq!(Digraph::cycle(4).unwrap().diameter().unwrap(), 3);
        assert_eq!(Digraph::complete(5).unwrap().diameter().unwrap(), 1);
    }

    #[test]
    fn two_node_weights_are_halves() {
        let g = Digraph::complete(2).unwrap();
        let w = WeightMatrix::column_stochastic(&g).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(w.get(i, j), 0.5);
            }
        }
    }

    #[test]
    fn cycle_weights_have_two_halves_per_column() {
        let g = Digraph::cycle(3).unwrap();
        let w = WeightMatrix::column_stochastic(&g).unwrap();
        for j in 0..3 {
            let halves = w.dense().column(j).iter().filter(|&&x| x == 0.5).count();
            assert_eq!(halves, 2);
        }
        assert_eq!(w.in_weights(1), &[(0, 0.5)]);
        assert!(w.respects(&g));
    }

    #[test]
    fn from_dense_rejects_row_stochastic() {
        let p = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.25, 0.75]);
        assert!(matches!(WeightMatrix::from_dense(p), Err(GraphError::InvalidWeights(_))));
    }

    #[test]
    fn json_round_trip() {
        let g = Digraph::erdos_renyi(6, 0.4, 3).unwrap();
        let back = Digraph::from_json(&g.to_json()).unwrap();
        assert_eq!(g, back);
        assert!(Digraph::from_json(r#"{"n": 2, "edges": [[0, 0]]}"#).is_err());
    }
}
