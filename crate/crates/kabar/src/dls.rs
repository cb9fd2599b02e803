//! Directed local search between ordered block pairs and the packing scheme
//! that runs it repeatedly while nodes stay eligible. The recorded move
//! sequences feed the layered model.

use std::collections::BTreeMap;
use std::collections::BinaryHeap;

use rand::prelude::*;

use crate::graph::{Graph, NodeId, Weight};
use crate::partition::{BlockId, EligibilityState, Partition};

/// Ordered node moves for one directed block pair, with prefix gain values.
/// `prefix_gains[d-1]` is the cut reduction when the first `d` nodes move
/// from `pair.0` to `pair.1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MoveSequence {
    pub pair: (BlockId, BlockId),
    pub nodes: Vec<NodeId>,
    pub prefix_gains: Vec<Weight>,
}

impl MoveSequence {
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// FM-style search restricted to moves from `a` into `b`, bounded by `tau`
/// moves. All moves are undone before returning and every moved node is
/// marked in `elig`, so later searches never touch a node adjacent to one
/// moved here.
pub fn directed_local_search<R: Rng>(
    g: &Graph,
    p: &mut Partition,
    a: BlockId,
    b: BlockId,
    tau: usize,
    elig: &mut EligibilityState,
    rng: &mut R,
) -> MoveSequence {
    debug_assert_ne!(a, b);
    let mut seq = MoveSequence {
        pair: (a, b),
        nodes: Vec::new(),
        prefix_gains: Vec::new(),
    };
    // seed: a random maximum-gain eligible boundary node of the pair
    let mut best: Option<(Weight, Vec<NodeId>)> = None;
    for v in 0..g.num_nodes() as NodeId {
        if p.block_of(v) != a || !elig.is_eligible(g, v) {
            continue;
        }
        if !g.neighbors(v).any(|(u, _)| p.block_of(u) == b) {
            continue;
        }
        let gain = p.gain(g, v, b);
        match &mut best {
            Some((bg, cands)) => {
                if gain > *bg {
                    best = Some((gain, vec![v]));
                } else if gain == *bg {
                    cands.push(v);
                }
            }
            None => best = Some((gain, vec![v])),
        }
    }
    let Some((seed_gain, candidates)) = best else {
        return seq;
    };
    let seed = *candidates.choose(rng).unwrap();

    let mut heap: BinaryHeap<(Weight, u64, NodeId)> = BinaryHeap::new();
    heap.push((seed_gain, rng.gen(), seed));
    let mut cumulative = 0;
    while seq.nodes.len() < tau {
        let Some((key, _, v)) = heap.pop() else { break };
        if p.block_of(v) != a {
            // already moved by this search
            continue;
        }
        let current = p.gain(g, v, b);
        if current != key {
            // stale priority; re-queue with the fresh gain
            heap.push((current, rng.gen(), v));
            continue;
        }
        let realized = p.move_node(g, v, b);
        debug_assert_eq!(realized, current);
        cumulative += realized;
        seq.nodes.push(v);
        seq.prefix_gains.push(cumulative);
        for (u, _) in g.neighbors(v) {
            if p.block_of(u) == a && elig.is_eligible(g, u) {
                heap.push((p.gain(g, u, b), rng.gen(), u));
            }
        }
    }

    // undo all moves and block the touched nodes for later searches
    for &v in seq.nodes.iter().rev() {
        p.move_node(g, v, a);
    }
    for &v in &seq.nodes {
        elig.mark(v);
    }
    seq
}

/// Best known prefix for one (pair, length) slot.
#[derive(Debug, Clone)]
pub struct PackedPrefix {
    pub gain: Weight,
    pub nodes: Vec<NodeId>,
}

#[derive(Debug, Clone, Default)]
pub struct PackedSearches {
    /// Per pair, entry d-1 is the best prefix of length d seen so far.
    pub per_pair: BTreeMap<(BlockId, BlockId), Vec<PackedPrefix>>,
}

impl PackedSearches {
    pub fn merge_sequence(&mut self, seq: &MoveSequence) {
        if seq.is_empty() {
            return;
        }
        let entry = self.per_pair.entry(seq.pair).or_default();
        for d in 1..=seq.nodes.len() {
            let gain = seq.prefix_gains[d - 1];
            if d > entry.len() {
                entry.push(PackedPrefix {
                    gain,
                    nodes: seq.nodes[..d].to_vec(),
                });
            } else if gain > entry[d - 1].gain {
                entry[d - 1] = PackedPrefix {
                    gain,
                    nodes: seq.nodes[..d].to_vec(),
                };
            }
        }
    }
}

/// Runs `mu` packing rounds of directed local searches over `pairs`,
/// keeping per (pair, prefix length) the best-gain prefix across rounds.
/// All rounds share `elig`, so later rounds only consume still-eligible
/// nodes.
pub fn pack_searches<R: Rng>(
    g: &Graph,
    p: &mut Partition,
    pairs: &[(BlockId, BlockId)],
    tau: usize,
    mu: usize,
    elig: &mut EligibilityState,
    rng: &mut R,
) -> PackedSearches {
    let mut packed = PackedSearches::default();
    pack_searches_into(g, p, pairs, tau, mu, elig, rng, &mut packed);
    packed
}

/// Like [`pack_searches`] but accumulating into an existing collection,
/// used when integration searches have already claimed some slots.
#[allow(clippy::too_many_arguments)]
pub fn pack_searches_into<R: Rng>(
    g: &Graph,
    p: &mut Partition,
    pairs: &[(BlockId, BlockId)],
    tau: usize,
    mu: usize,
    elig: &mut EligibilityState,
    rng: &mut R,
    packed: &mut PackedSearches,
) {
    let mut order: Vec<(BlockId, BlockId)> = pairs.to_vec();
    for _ in 0..mu {
        order.shuffle(rng);
        for &(a, b) in &order {
            let seq = directed_local_search(g, p, a, b, tau, elig, rng);
            packed.merge_sequence(&seq);
        }
    }
}
