//! Directed communication topologies.
//!
//! Nodes are indexed `0..n` in the API. An edge `(i, j)` means node `j`
//! sends to node `i`, so `j` is an in-neighbor of `i`. Every node carries an
//! implicit self-loop, which is why both neighborhoods of `i` contain `i`.
//!
//! The edge-list text format is 1-based: the first non-comment line holds
//! `n`, each following line holds `i j` (meaning `j -> i`). `#` starts a
//! comment. Self-loops may be listed but never need to be.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    n: usize,
    in_adj: Vec<Vec<usize>>,
    out_adj: Vec<Vec<usize>>,
}

impl Digraph {
    /// Builds a graph from `(receiver, sender)` pairs, adding self-loops.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::input("a digraph needs at least one node"));
        }
        let mut in_adj: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        let mut out_adj: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::input(format!(
                    "edge ({i}, {j}) references a node outside 0..{n}"
                )));
            }
            in_adj[i].push(j);
            out_adj[j].push(i);
        }
        for list in in_adj.iter_mut().chain(out_adj.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { n, in_adj, out_adj })
    }

    /// Directed cycle `0 -> 1 -> ... -> n-1 -> 0`.
    pub fn cycle(n: usize) -> Result<Self> {
        Self::from_edges(n, (0..n).map(|j| ((j + 1) % n, j)))
    }

    /// Directed path `0 -> 1 -> ... -> n-1`; not strongly connected for n > 1.
    pub fn path(n: usize) -> Result<Self> {
        Self::from_edges(n, (1..n).map(|i| (i, i - 1)))
    }

    pub fn complete(n: usize) -> Result<Self> {
        Self::from_edges(
            n,
            (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))),
        )
    }

    /// Random strongly connected digraph: a random Hamiltonian cycle plus every
    /// other ordered pair independently with probability `extra_edge_prob`.
    pub fn random_strongly_connected(n: usize, extra_edge_prob: f64, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::input("a digraph needs at least one node"));
        }
        if !(0.0..=1.0).contains(&extra_edge_prob) {
            return Err(Error::input(format!(
                "extra edge probability {extra_edge_prob} is outside [0, 1]"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut edges = Vec::new();
        let mut on_cycle = vec![vec![false; n]; n];
        for k in 0..n {
            let from = order[k];
            let to = order[(k + 1) % n];
            if from != to {
                edges.push((to, from));
                on_cycle[to][from] = true;
            }
        }
        for i in 0..n {
            for j in 0..n {
                if i == j || on_cycle[i][j] {
                    continue;
                }
                // Draw for every candidate pair so the sequence of draws does
                // not depend on the probability value.
                if rng.random::<f64>() < extra_edge_prob {
                    edges.push((i, j));
                }
            }
        }
        Self::from_edges(n, edges)
    }

    /// Undirected (symmetric) version of a random strongly connected digraph.
    pub fn random_undirected(n: usize, extra_edge_prob: f64, seed: u64) -> Result<Self> {
        let g = Self::random_strongly_connected(n, extra_edge_prob, seed)?;
        Ok(g.symmetrized())
    }

    /// Adds the reverse of every edge.
    pub fn symmetrized(&self) -> Self {
        let edges: Vec<(usize, usize)> = self.edges().flat_map(|(i, j)| [(i, j), (j, i)]).collect();
        Self::from_edges(self.n, edges).expect("indices already validated")
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Number of directed edges excluding self-loops.
    pub fn edge_count(&self) -> usize {
        self.in_adj.iter().map(|l| l.len() - 1).sum()
    }

    /// Iterates `(receiver, sender)` pairs, self-loops excluded.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.in_adj
            .iter()
            .enumerate()
            .flat_map(|(i, list)| list.iter().filter(move |&&j| j != i).map(move |&j| (i, j)))
    }

    pub fn has_edge(&self, receiver: usize, sender: usize) -> bool {
        receiver < self.n && self.in_adj[receiver].binary_search(&sender).is_ok()
    }

    /// Senders into `i`, including `i`, ascending.
    pub fn in_neighbors(&self, i: usize) -> Result<&[usize]> {
        self.check_node(i)?;
        Ok(&self.in_adj[i])
    }

    /// Receivers from `i`, including `i`, ascending.
    pub fn out_neighbors(&self, i: usize) -> Result<&[usize]> {
        self.check_node(i)?;
        Ok(&self.out_adj[i])
    }

    pub fn in_degree(&self, i: usize) -> Result<usize> {
        self.in_neighbors(i).map(<[usize]>::len)
    }

    pub fn out_degree(&self, i: usize) -> Result<usize> {
        self.out_neighbors(i).map(<[usize]>::len)
    }

    fn check_node(&self, i: usize) -> Result<()> {
        if i < self.n {
            Ok(())
        } else {
            Err(Error::input(format!("node {i} is outside 0..{}", self.n)))
        }
    }

    /// Forward reachability from node 0 along out-edges and backward along
    /// in-edges both cover the graph.
    pub fn is_strongly_connected(&self) -> bool {
        reaches_all(&self.out_adj) && reaches_all(&self.in_adj)
    }

    /// Every edge has its reverse.
    pub fn is_symmetric(&self) -> bool {
        self.edges().all(|(i, j)| self.has_edge(j, i))
    }

    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(no, l)| (no + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (no, header) = lines
            .next()
            .ok_or_else(|| Error::input("edge list is empty; expected node count"))?;
        let n: usize = header
            .parse()
            .map_err(|_| Error::input(format!("line {no}: expected node count, got `{header}`")))?;
        let mut edges = Vec::new();
        for (no, line) in lines {
            let ids: Vec<&str> = line.split_whitespace().collect();
            if ids.len() != 2 {
                return Err(Error::input(format!(
                    "line {no}: expected `i j`, got `{line}`"
                )));
            }
            let parse = |s: &str| -> Result<usize> {
                let id: usize = s
                    .parse()
                    .map_err(|_| Error::input(format!("line {no}: bad node id `{s}`")))?;
                if id == 0 || id > n {
                    return Err(Error::input(format!(
                        "line {no}: node id {id} outside 1..={n}"
                    )));
                }
                Ok(id - 1)
            };
            edges.push((parse(ids[0])?, parse(ids[1])?));
        }
        Self::from_edges(n, edges)
    }

    pub fn read_edge_list(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_edge_list(&text)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{}\n", self.n);
        for (i, j) in self.edges() {
            let _ = writeln!(out, "{} {}", i + 1, j + 1);
        }
        out
    }
}

fn reaches_all(adj: &[Vec<usize>]) -> bool {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == n
}
