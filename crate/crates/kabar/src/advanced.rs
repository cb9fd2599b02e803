//! The τ-layer model over packed directed local searches: construction,
//! conflict detection, conflict resolution by edge removal, and cycle
//! application.
//!
//! Model node (block i, layer d) has id (d-1)·k + i; the virtual source s
//! is k·τ and, in balancing mode, t is k·τ + 1. An edge inside layer d for
//! the pair (A,B) encodes moving the best packed prefix of d nodes from A
//! to B and carries weight −g_(A,B)[d].

use rand::prelude::*;

use crate::error::KabarError;
use crate::graph::{Graph, Weight};
use crate::model::{self, CycleResult, EdgeId, ModelGraph, ModelNodeId};
use crate::partition::{BlockId, NodeMove, Partition};
use crate::dls::PackedSearches;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgePayload {
    Structural,
    /// Moves the first `d` nodes of the packed sequence for `pair`.
    Prefix { pair: (BlockId, BlockId), d: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// s fans out to every layer node; layer nodes with enough slack
    /// connect back to s.
    Refinement,
    /// s feeds only overloaded blocks; layer nodes with enough slack
    /// connect to t instead.
    Balancing,
}

#[derive(Debug, Clone)]
pub struct AdvancedModel {
    pub mg: ModelGraph,
    pub s: ModelNodeId,
    /// Present in balancing mode only.
    pub t: Option<ModelNodeId>,
    pub tau: usize,
    k: usize,
    payload: Vec<EdgePayload>,
    packed: PackedSearches,
}

impl AdvancedModel {
    pub fn payload(&self, e: EdgeId) -> EdgePayload {
        self.payload[e]
    }

    pub fn packed(&self) -> &PackedSearches {
        &self.packed
    }

    pub fn node_id(&self, block: BlockId, layer: usize) -> ModelNodeId {
        ((layer - 1) * self.k) as ModelNodeId + block
    }

    /// Translates the payload edges of a cycle or path into node moves, in
    /// edge order.
    pub fn moves_for_edges(&self, edges: &[EdgeId]) -> Vec<NodeMove> {
        let mut moves = Vec::new();
        for &e in edges {
            if let EdgePayload::Prefix { pair, d } = self.payload[e] {
                let prefix = &self.packed.per_pair[&pair][d - 1];
                for &v in &prefix.nodes {
                    moves.push(NodeMove {
                        node: v,
                        from: pair.0,
                        to: pair.1,
                    });
                }
            }
        }
        moves
    }
}

/// Builds the layered model from packed searches against the current
/// partition. With `conflict_free` set, the inter-layer backward edges are
/// omitted; the model then encodes fewer combinations but no conflicts.
pub fn build_advanced_model(
    p: &Partition,
    packed: &PackedSearches,
    tau: usize,
    kind: ModelKind,
    conflict_free: bool,
) -> AdvancedModel {
    let k = p.k();
    let s = (k * tau) as ModelNodeId;
    let t = match kind {
        ModelKind::Refinement => None,
        ModelKind::Balancing => Some(s + 1),
    };
    let mut mg = ModelGraph::new(k * tau + 1 + t.is_some() as usize);
    let mut payload = Vec::new();
    let node_id = |block: BlockId, layer: usize| ((layer - 1) * k) as ModelNodeId + block;

    for (&(a, b), prefixes) in &packed.per_pair {
        for d in 1..=prefixes.len().min(tau) {
            let weight = -prefixes[d - 1].gain;
            mg.add_edge(node_id(a, d), node_id(b, d), weight);
            payload.push(EdgePayload::Prefix { pair: (a, b), d });
            if !conflict_free {
                // backward edges: the receiving block absorbs a surplus of
                // ell nodes, which needs that much slack
                let max_ell = (d - 1).min(p.slack(b) as usize);
                for ell in 1..=max_ell {
                    mg.add_edge(node_id(a, d), node_id(b, d - ell), weight);
                    payload.push(EdgePayload::Prefix { pair: (a, b), d });
                }
            }
        }
    }
    for i in 0..k as BlockId {
        for d in 1..tau {
            mg.add_edge(node_id(i, d), node_id(i, d + 1), 0);
            payload.push(EdgePayload::Structural);
        }
    }
    match kind {
        ModelKind::Refinement => {
            for i in 0..k as BlockId {
                for d in 1..=tau {
                    mg.add_edge(s, node_id(i, d), 0);
                    payload.push(EdgePayload::Structural);
                    if p.slack(i) as usize >= d {
                        mg.add_edge(node_id(i, d), s, 0);
                        payload.push(EdgePayload::Structural);
                    }
                }
            }
        }
        ModelKind::Balancing => {
            let t = t.unwrap();
            for i in 0..k as BlockId {
                for d in 1..=tau {
                    if p.is_overloaded(i) {
                        mg.add_edge(s, node_id(i, d), 0);
                        payload.push(EdgePayload::Structural);
                    }
                    if p.slack(i) as usize >= d {
                        mg.add_edge(node_id(i, d), t, 0);
                        payload.push(EdgePayload::Structural);
                    }
                }
            }
        }
    }
    debug_assert_eq!(payload.len(), mg.num_edges());
    AdvancedModel {
        mg,
        s,
        t,
        tau,
        k,
        payload,
        packed: packed.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Conflict {
    /// The cycle uses two payload edges for the same quotient pair, so
    /// their move sets overlap and the weights are not additive.
    NotSimpleInQuotient { offending: Vec<EdgeId> },
    /// Simulating the payload moves drives some block above its capacity.
    Overload { offending: Vec<EdgeId> },
}

/// Checks a cycle (or path) given by its edge list for the two conflict
/// kinds. Blocks already above capacity are tolerated as long as the moves
/// do not grow them further.
pub fn check_edges(p: &Partition, am: &AdvancedModel, edges: &[EdgeId]) -> Option<Conflict> {
    let mut seen: Vec<(BlockId, BlockId, EdgeId)> = Vec::new();
    for &e in edges {
        if let EdgePayload::Prefix { pair, .. } = am.payload(e) {
            if let Some(&(_, _, prev)) = seen.iter().find(|&&(a, b, _)| (a, b) == pair) {
                return Some(Conflict::NotSimpleInQuotient {
                    offending: vec![prev, e],
                });
            }
            seen.push((pair.0, pair.1, e));
        }
    }
    let mut sizes: Vec<i64> = p.block_sizes().iter().map(|&s| s as i64).collect();
    let mut payload_edges = Vec::new();
    for &e in edges {
        if let EdgePayload::Prefix { pair, d } = am.payload(e) {
            sizes[pair.0 as usize] -= d as i64;
            sizes[pair.1 as usize] += d as i64;
            payload_edges.push(e);
        }
    }
    for b in 0..p.k() {
        let limit = (p.ceil_cap() as i64).max(p.block_size(b as BlockId) as i64);
        if sizes[b] > limit {
            return Some(Conflict::Overload {
                offending: payload_edges,
            });
        }
    }
    None
}

pub fn check_cycle(p: &Partition, am: &AdvancedModel, c: &CycleResult) -> Option<Conflict> {
    check_edges(p, am, &c.edges)
}

/// Detects a negative cycle, resolving conflicts by removing a random
/// payload edge of the conflicted cycle and retrying. Terminates because
/// every retry removes an edge. Returns the concatenated payload moves and
/// the cycle weight, or `None` when the model has no usable negative cycle.
pub fn solve_advanced<R: Rng>(
    p: &Partition,
    am: &mut AdvancedModel,
    rng: &mut R,
) -> Option<(Vec<NodeMove>, Weight)> {
    loop {
        let cycle = model::detect_negative_cycle(&am.mg, am.s)?;
        if check_cycle(p, am, &cycle).is_some() {
            let payload_edges: Vec<EdgeId> = cycle
                .edges
                .iter()
                .copied()
                .filter(|&e| matches!(am.payload(e), EdgePayload::Prefix { .. }))
                .collect();
            let &victim = payload_edges
                .choose(rng)
                .expect("conflicted cycle without payload edges");
            am.mg.disable_edge(victim);
            continue;
        }
        let moves = am.moves_for_edges(&cycle.edges);
        return Some((moves, cycle.weight));
    }
}

/// Applies an accepted cycle's moves; the cut must change by exactly the
/// predicted cycle weight.
pub fn apply_advanced_cycle(
    g: &Graph,
    p: &mut Partition,
    moves: &[NodeMove],
    predicted_delta: Weight,
) -> Result<(), KabarError> {
    let overload_before = p.total_overload();
    let gain = p.apply_node_moves(g, moves)?;
    if -gain != predicted_delta {
        return Err(KabarError::Internal(format!(
            "predicted cut delta {predicted_delta} but realized {}",
            -gain
        )));
    }
    debug_assert!(p.total_overload() <= overload_before);
    Ok(())
}
