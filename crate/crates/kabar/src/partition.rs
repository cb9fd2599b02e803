//! Block assignment with cached block sizes and cut value, plus the
//! eligibility marking used during model construction.

use crate::error::KabarError;
use crate::graph::{Graph, NodeId, Weight};

pub type BlockId = u32;

/// Ceiling division for capacity arithmetic.
pub fn ceil_div(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    k: usize,
    assign: Vec<BlockId>,
    block_size: Vec<u32>,
    cut: Weight,
    /// Perfect-balance capacity ⌈n/k⌉.
    ceil_cap: u32,
    /// Input capacity ⌈(1+ε)·⌈n/k⌉⌉.
    l_max: u32,
}

impl Partition {
    pub fn from_assignment(
        g: &Graph,
        k: usize,
        epsilon: f64,
        assign: Vec<BlockId>,
    ) -> Result<Partition, KabarError> {
        if k == 0 {
            return Err(KabarError::InvalidInput("k must be positive".into()));
        }
        if assign.len() != g.num_nodes() {
            return Err(KabarError::InvalidInput(format!(
                "assignment covers {} nodes but graph has {}",
                assign.len(),
                g.num_nodes()
            )));
        }
        let mut block_size = vec![0u32; k];
        for &b in &assign {
            let Some(s) = block_size.get_mut(b as usize) else {
                return Err(KabarError::InvalidInput(format!(
                    "block id {b} out of range for k={k}"
                )));
            };
            *s += 1;
        }
        let ceil_cap = ceil_div(g.num_nodes(), k) as u32;
        let l_max = ((1.0 + epsilon) * ceil_cap as f64).ceil() as u32;
        let mut p = Partition {
            k,
            assign,
            block_size,
            cut: 0,
            ceil_cap,
            l_max,
        };
        p.cut = p.recompute_cut(g);
        Ok(p)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn block_of(&self, v: NodeId) -> BlockId {
        self.assign[v as usize]
    }

    pub fn assignment(&self) -> &[BlockId] {
        &self.assign
    }

    pub fn block_size(&self, b: BlockId) -> u32 {
        self.block_size[b as usize]
    }

    pub fn block_sizes(&self) -> &[u32] {
        &self.block_size
    }

    pub fn cut(&self) -> Weight {
        self.cut
    }

    /// Perfect-balance capacity ⌈n/k⌉.
    pub fn ceil_cap(&self) -> u32 {
        self.ceil_cap
    }

    pub fn l_max(&self) -> u32 {
        self.l_max
    }

    /// Nodes block `b` can still take without exceeding ⌈n/k⌉.
    pub fn slack(&self, b: BlockId) -> u32 {
        self.ceil_cap.saturating_sub(self.block_size[b as usize])
    }

    pub fn is_overloaded(&self, b: BlockId) -> bool {
        self.block_size[b as usize] > self.ceil_cap
    }

    pub fn total_overload(&self) -> u32 {
        self.block_size
            .iter()
            .map(|&s| s.saturating_sub(self.ceil_cap))
            .sum()
    }

    pub fn is_perfectly_balanced(&self) -> bool {
        self.total_overload() == 0
    }

    pub fn recompute_cut(&self, g: &Graph) -> Weight {
        let mut cut = 0;
        for v in 0..g.num_nodes() as NodeId {
            for (u, w) in g.neighbors(v) {
                if u > v && self.assign[u as usize] != self.assign[v as usize] {
                    cut += w;
                }
            }
        }
        cut
    }

    /// Cut reduction when `v` is moved from its block into `target`.
    pub fn gain(&self, g: &Graph, v: NodeId, target: BlockId) -> Weight {
        let own = self.assign[v as usize];
        debug_assert_ne!(own, target, "gain target equals current block");
        let mut to_target = 0;
        let mut internal = 0;
        for (u, w) in g.neighbors(v) {
            let b = self.assign[u as usize];
            if b == target {
                to_target += w;
            } else if b == own {
                internal += w;
            }
        }
        to_target - internal
    }

    /// Moves `v` into `target`, updating sizes and cut incrementally.
    /// Returns the realized gain (cut decreases by this amount).
    pub fn move_node(&mut self, g: &Graph, v: NodeId, target: BlockId) -> Weight {
        let gain = self.gain(g, v, target);
        let own = self.assign[v as usize];
        self.block_size[own as usize] -= 1;
        self.block_size[target as usize] += 1;
        self.assign[v as usize] = target;
        self.cut -= gain;
        debug_assert_eq!(self.cut, self.recompute_cut(g));
        gain
    }

    /// Applies a list of (node, target) moves sequentially. The summed
    /// sequential gains are returned. A node may appear at most once.
    pub fn apply_moves(
        &mut self,
        g: &Graph,
        moves: &[(NodeId, BlockId)],
    ) -> Result<Weight, KabarError> {
        let mut seen = vec![false; self.assign.len()];
        for &(v, _) in moves {
            if std::mem::replace(&mut seen[v as usize], true) {
                return Err(KabarError::InvalidInput(format!(
                    "node {v} appears twice in move list"
                )));
            }
        }
        let mut total = 0;
        for &(v, b) in moves {
            total += self.move_node(g, v, b);
        }
        Ok(total)
    }

    pub fn is_boundary(&self, g: &Graph, v: NodeId) -> bool {
        let own = self.assign[v as usize];
        g.neighbors(v).any(|(u, _)| self.assign[u as usize] != own)
    }

    /// Directed quotient edges: both (A,B) and (B,A) for every adjacent
    /// unordered block pair, without duplicates.
    pub fn quotient_edges(&self, g: &Graph) -> Vec<(BlockId, BlockId)> {
        let mut adjacent = vec![false; self.k * self.k];
        for v in 0..g.num_nodes() as NodeId {
            let a = self.assign[v as usize] as usize;
            for (u, _) in g.neighbors(v) {
                let b = self.assign[u as usize] as usize;
                if a != b {
                    adjacent[a * self.k + b] = true;
                }
            }
        }
        let mut edges = Vec::new();
        for a in 0..self.k {
            for b in 0..self.k {
                if adjacent[a * self.k + b] {
                    edges.push((a as BlockId, b as BlockId));
                }
            }
        }
        edges
    }
}

/// A single node relocation with its recorded source block, used when
/// replaying model cycles and paths against the live partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeMove {
    pub node: NodeId,
    pub from: BlockId,
    pub to: BlockId,
}

impl Partition {
    /// Applies recorded moves after checking that every node is still in
    /// its recorded source block and that no block ends above
    /// max(⌈n/k⌉, its prior size). Returns the total realized gain.
    pub fn apply_node_moves(
        &mut self,
        g: &Graph,
        moves: &[NodeMove],
    ) -> Result<Weight, KabarError> {
        for mv in moves {
            if self.block_of(mv.node) != mv.from {
                return Err(KabarError::StaleModel {
                    node: mv.node,
                    expected_block: mv.from,
                });
            }
        }
        let mut sizes = self.block_size.clone();
        for mv in moves {
            sizes[mv.from as usize] -= 1;
            sizes[mv.to as usize] += 1;
        }
        for b in 0..self.k {
            if sizes[b] > self.ceil_cap.max(self.block_size[b]) {
                return Err(KabarError::Internal(format!(
                    "move set overloads block {b}: {} > cap {}",
                    sizes[b], self.ceil_cap
                )));
            }
        }
        let pairs: Vec<(NodeId, BlockId)> = moves.iter().map(|m| (m.node, m.to)).collect();
        self.apply_moves(g, &pairs)
    }
}

/// Marking state driving node eligibility during one model-construction
/// phase. A node is eligible iff neither it nor any neighbor is marked.
#[derive(Debug, Clone)]
pub struct EligibilityState {
    marked: Vec<bool>,
}

impl EligibilityState {
    pub fn new(n: usize) -> EligibilityState {
        EligibilityState {
            marked: vec![false; n],
        }
    }

    pub fn mark(&mut self, v: NodeId) {
        self.marked[v as usize] = true;
    }

    pub fn is_marked(&self, v: NodeId) -> bool {
        self.marked[v as usize]
    }

    pub fn is_eligible(&self, g: &Graph, v: NodeId) -> bool {
        !self.marked[v as usize] && !g.neighbors(v).any(|(u, _)| self.marked[u as usize])
    }

    pub fn reset(&mut self) {
        self.marked.fill(false);
    }
}
