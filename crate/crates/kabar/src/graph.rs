//! Immutable undirected graph in compressed adjacency form.
//!
//! Edge weights are positive integers. Parallel edges are merged by weight
//! summation and self-loops are dropped at construction time, so the stored
//! graph is always simple and symmetric.

use std::collections::BTreeMap;

use crate::error::KabarError;

pub type NodeId = u32;
pub type Weight = i64;

#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    m: usize,
    offsets: Vec<usize>,
    neighbors: Vec<NodeId>,
    weights: Vec<Weight>,
}

impl Graph {
    /// Builds a graph from an undirected edge list. Endpoints may appear in
    /// any order; duplicates (in either orientation) are merged, self-loops
    /// are dropped.
    pub fn from_edges(n: usize, edges: &[(NodeId, NodeId, Weight)]) -> Result<Graph, KabarError> {
        let mut merged: BTreeMap<(NodeId, NodeId), Weight> = BTreeMap::new();
        for &(u, v, w) in edges {
            if u as usize >= n || v as usize >= n {
                return Err(KabarError::InvalidInput(format!(
                    "edge ({u},{v}) references a node >= n={n}"
                )));
            }
            if w <= 0 {
                return Err(KabarError::InvalidInput(format!(
                    "edge ({u},{v}) has non-positive weight {w}"
                )));
            }
            if u == v {
                continue;
            }
            let key = if u < v { (u, v) } else { (v, u) };
            *merged.entry(key).or_insert(0) += w;
        }
        let mut degree = vec![0usize; n];
        for &(u, v) in merged.keys() {
            degree[u as usize] += 1;
            degree[v as usize] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let total = offsets[n];
        let mut neighbors = vec![0 as NodeId; total];
        let mut weights = vec![0 as Weight; total];
        let mut cursor = offsets[..n].to_vec();
        for (&(u, v), &w) in &merged {
            neighbors[cursor[u as usize]] = v;
            weights[cursor[u as usize]] = w;
            cursor[u as usize] += 1;
            neighbors[cursor[v as usize]] = u;
            weights[cursor[v as usize]] = w;
            cursor[v as usize] += 1;
        }
        Ok(Graph {
            n,
            m: merged.len(),
            offsets,
            neighbors,
            weights,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    /// Number of undirected edges after merging.
    pub fn num_edges(&self) -> usize {
        self.m
    }

    /// Neighbors of `v` with edge weights.
    pub fn neighbors(&self, v: NodeId) -> impl Iterator<Item = (NodeId, Weight)> + '_ {
        let lo = self.offsets[v as usize];
        let hi = self.offsets[v as usize + 1];
        self.neighbors[lo..hi]
            .iter()
            .copied()
            .zip(self.weights[lo..hi].iter().copied())
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.offsets[v as usize + 1] - self.offsets[v as usize]
    }

    pub fn total_edge_weight(&self) -> Weight {
        self.weights.iter().sum::<Weight>() / 2
    }

    /// Connected components; returns (component id per node, component count).
    pub fn components(&self) -> (Vec<u32>, usize) {
        let mut comp = vec![u32::MAX; self.n];
        let mut count = 0u32;
        let mut stack = Vec::new();
        for start in 0..self.n {
            if comp[start] != u32::MAX {
                continue;
            }
            comp[start] = count;
            stack.push(start as NodeId);
            while let Some(v) = stack.pop() {
                for (u, _) in self.neighbors(v) {
                    if comp[u as usize] == u32::MAX {
                        comp[u as usize] = count;
                        stack.push(u);
                    }
                }
            }
            count += 1;
        }
        (comp, count as usize)
    }

    pub fn is_connected(&self) -> bool {
        self.n <= 1 || self.components().1 == 1
    }
}
