//! The single-node-per-edge model: one node per block plus the virtual
//! source, one candidate move per directed quotient edge.

use rand::prelude::*;

use crate::error::KabarError;
use crate::graph::{Graph, NodeId, Weight};
use crate::model::{CycleResult, EdgeId, ModelGraph, ModelNodeId};
use crate::partition::{BlockId, EligibilityState, NodeMove, Partition};

#[derive(Debug, Clone, Copy)]
pub struct BasicMove {
    pub node: NodeId,
    pub from: BlockId,
    pub to: BlockId,
    pub gain: Weight,
}

#[derive(Debug, Clone)]
pub struct BasicModel {
    pub mg: ModelGraph,
    /// Model node id of the virtual source (block i maps to model node i).
    pub s: ModelNodeId,
    edge_move: Vec<Option<BasicMove>>,
}

impl BasicModel {
    pub fn edge_move(&self, e: EdgeId) -> Option<&BasicMove> {
        self.edge_move[e].as_ref()
    }
}

/// Visits the directed quotient edges in random order; for each, selects
/// (and marks) the maximum-gain eligible boundary node, tie-broken
/// randomly. The model edge weight is the negative gain. Edges back to the
/// source are added only when some block has capacity slack to use.
pub fn build_basic_model<R: Rng>(g: &Graph, p: &Partition, rng: &mut R) -> BasicModel {
    let k = p.k();
    let s = k as ModelNodeId;
    let mut mg = ModelGraph::new(k + 1);
    let mut edge_move: Vec<Option<BasicMove>> = Vec::new();
    let mut elig = EligibilityState::new(g.num_nodes());

    let mut pairs = p.quotient_edges(g);
    pairs.shuffle(rng);

    // per-pair boundary candidate scan
    for (a, b) in pairs {
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
        if let Some((gain, cands)) = best {
            let v = *cands.choose(rng).unwrap();
            elig.mark(v);
            let id = mg.add_edge(a, b, -gain);
            debug_assert_eq!(id, edge_move.len());
            edge_move.push(Some(BasicMove {
                node: v,
                from: a,
                to: b,
                gain,
            }));
        }
    }

    for i in 0..k as ModelNodeId {
        let id = mg.add_edge(s, i, 0);
        debug_assert_eq!(id, edge_move.len());
        edge_move.push(None);
    }
    let perfectly_divisible = g.num_nodes() % k == 0;
    if !(p.is_perfectly_balanced() && perfectly_divisible) {
        for i in 0..k as BlockId {
            if p.slack(i) >= 1 {
                let id = mg.add_edge(i, s, 0);
                debug_assert_eq!(id, edge_move.len());
                edge_move.push(None);
            }
        }
    }

    BasicModel { mg, s, edge_move }
}

/// Applies the single-node moves along a model cycle. The cut changes by
/// exactly the cycle weight; block sizes are unchanged for cycles avoiding
/// the source.
pub fn apply_cycle(
    g: &Graph,
    p: &mut Partition,
    bm: &BasicModel,
    c: &CycleResult,
) -> Result<Weight, KabarError> {
    let moves: Vec<NodeMove> = c
        .edges
        .iter()
        .filter_map(|&e| bm.edge_move(e))
        .map(|m| NodeMove {
            node: m.node,
            from: m.from,
            to: m.to,
        })
        .collect();
    let sizes_before = p.block_sizes().to_vec();
    let cut_before = p.cut();
    let gain = p.apply_node_moves(g, &moves)?;
    if cut_before - gain != cut_before + c.weight {
        return Err(KabarError::Internal(format!(
            "cycle weight {} does not match realized gain {}",
            c.weight, gain
        )));
    }
    let through_s = c.edges.iter().any(|&e| bm.edge_move(e).is_none());
    if !through_s {
        debug_assert_eq!(p.block_sizes(), &sizes_before[..]);
    }
    Ok(-gain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model;
    use rand_chacha::ChaCha8Rng;

    /// Three blocks of four nodes, every pair of blocks adjacent, with a
    /// rotation of profitable single-node moves available.
    fn three_block_instance() -> (Graph, Partition) {
        // blocks: {0..4}, {4..8}, {8..12}; node 0 prefers block 1,
        // node 4 prefers block 2, node 8 prefers block 0.
        let edges = vec![
            (1, 2, 1),
            (2, 3, 1),
            (3, 1, 1),
            (5, 6, 1),
            (6, 7, 1),
            (7, 5, 1),
            (9, 10, 1),
            (10, 11, 1),
            (11, 9, 1),
            (0, 5, 1),
            (0, 6, 1),
            (4, 9, 1),
            (4, 10, 1),
            (8, 1, 1),
            (8, 2, 1),
        ];
        let g = Graph::from_edges(12, &edges).unwrap();
        let assign = vec![0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2];
        let p = Partition::from_assignment(&g, 3, 0.0, assign).unwrap();
        (g, p)
    }

    /// The profitable rotation only materializes when the shuffle visits
    /// the forward quotient edges before the reverse ones mark their
    /// boundary, so scan a few seeds for a model with a negative cycle.
    fn model_with_negative_cycle(
        g: &Graph,
        p: &Partition,
    ) -> (BasicModel, model::CycleResult) {
        for seed in 0..64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let bm = build_basic_model(g, p, &mut rng);
            if let Some(c) = model::detect_negative_cycle(&bm.mg, bm.s) {
                return (bm, c);
            }
        }
        panic!("no seed produced a negative cycle");
    }

    #[test]
    fn negative_cycle_preserves_sizes_and_cut_drops_by_weight() {
        let (g, mut p) = three_block_instance();
        let (bm, c) = model_with_negative_cycle(&g, &p);
        let sizes = p.block_sizes().to_vec();
        let before = p.cut();
        let delta = apply_cycle(&g, &mut p, &bm, &c).unwrap();
        assert_eq!(delta, c.weight);
        assert_eq!(p.cut(), before + c.weight);
        assert!(p.cut() < before);
        assert_eq!(p.block_sizes(), &sizes[..]);
        assert_eq!(p.cut(), p.recompute_cut(&g));
    }

    #[test]
    fn empty_boundary_yields_no_block_edges() {
        let g = Graph::from_edges(6, &[(0, 1, 1), (2, 3, 1), (4, 5, 1)]).unwrap();
        let p = Partition::from_assignment(&g, 3, 0.0, vec![0, 0, 1, 1, 2, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bm = build_basic_model(&g, &p, &mut rng);
        let block_edges = (0..bm.mg.num_edges())
            .filter(|&e| bm.edge_move(e).is_some())
            .count();
        assert_eq!(block_edges, 0);
    }

    #[test]
    fn selected_nodes_form_independent_set() {
        for seed in 0..30 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 16;
            let mut edges = Vec::new();
            for v in 1..n {
                edges.push((rng.gen_range(0..v) as NodeId, v as NodeId, 1));
            }
            for _ in 0..n {
                edges.push((
                    rng.gen_range(0..n) as NodeId,
                    rng.gen_range(0..n) as NodeId,
                    rng.gen_range(1..=3),
                ));
            }
            let g = Graph::from_edges(n, &edges).unwrap();
            let assign = (0..n).map(|v| (v % 4) as BlockId).collect();
            let p = Partition::from_assignment(&g, 4, 0.0, assign).unwrap();
            let bm = build_basic_model(&g, &p, &mut rng);
            let selected: Vec<NodeId> = (0..bm.mg.num_edges())
                .filter_map(|e| bm.edge_move(e))
                .map(|m| m.node)
                .collect();
            for i in 0..selected.len() {
                for j in i + 1..selected.len() {
                    assert_ne!(selected[i], selected[j]);
                    assert!(!g.neighbors(selected[i]).any(|(u, _)| u == selected[j]));
                }
            }
        }
    }

    #[test]
    fn model_edge_weight_is_negative_max_eligible_gain() {
        // replay oracle with the same seed: rebuild the selection by hand
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 900);
            let n = 16;
            let mut edges = Vec::new();
            for v in 1..n {
                edges.push((rng.gen_range(0..v) as NodeId, v as NodeId, 1));
            }
            let g = Graph::from_edges(n, &edges).unwrap();
            let assign: Vec<BlockId> = (0..n).map(|v| (v % 4) as BlockId).collect();
            let p = Partition::from_assignment(&g, 4, 0.0, assign).unwrap();

            let mut build_rng = ChaCha8Rng::seed_from_u64(seed);
            let bm = build_basic_model(&g, &p, &mut build_rng);

            // replay: same shuffle, same tie-breaks
            let mut replay_rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pairs = p.quotient_edges(&g);
            pairs.shuffle(&mut replay_rng);
            let mut elig = EligibilityState::new(n);
            let mut expected: Vec<(BlockId, BlockId, Weight)> = Vec::new();
            for (a, b) in pairs {
                let mut best: Option<(Weight, Vec<NodeId>)> = None;
                for v in 0..n as NodeId {
                    if p.block_of(v) != a
                        || !elig.is_eligible(&g, v)
                        || !g.neighbors(v).any(|(u, _)| p.block_of(u) == b)
                    {
                        continue;
                    }
                    let gain = p.gain(&g, v, b);
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
                if let Some((gain, cands)) = best {
                    let v = *cands.choose(&mut replay_rng).unwrap();
                    elig.mark(v);
                    expected.push((a, b, -gain));
                }
            }
            let actual: Vec<(BlockId, BlockId, Weight)> = (0..bm.mg.num_edges())
                .filter(|&e| bm.edge_move(e).is_some())
                .map(|e| {
                    let me = bm.mg.edge(e);
                    (me.from, me.to, me.weight)
                })
                .collect();
            assert_eq!(actual, expected);
        }
    }

    #[test]
    fn stale_cycle_rejected() {
        let (g, mut p) = three_block_instance();
        let (bm, c) = model_with_negative_cycle(&g, &p);
        // invalidate one payload node by moving it elsewhere first
        let mv = c
            .edges
            .iter()
            .find_map(|&e| bm.edge_move(e))
            .expect("payload edge");
        let other = (mv.from + 1) % 3;
        let other = if other == mv.to { (other + 1) % 3 } else { other };
        p.move_node(&g, mv.node, other);
        assert!(matches!(
            apply_cycle(&g, &mut p, &bm, &c),
            Err(KabarError::StaleModel { .. })
        ));
    }

    #[test]
    fn two_block_cycles_are_swaps() {
        // on k=2 any cycle without s has length two: a classical node swap
        let g = Graph::from_edges(
            6,
            &[(0, 1, 1), (1, 2, 1), (3, 4, 1), (4, 5, 1), (0, 3, 2), (2, 5, 2)],
        )
        .unwrap();
        let p = Partition::from_assignment(&g, 2, 0.0, vec![0, 0, 1, 1, 1, 0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let bm = build_basic_model(&g, &p, &mut rng);
        if let Some(c) = model::detect_negative_cycle(&bm.mg, bm.s) {
            let payload: Vec<_> = c.edges.iter().filter_map(|&e| bm.edge_move(e)).collect();
            if payload.len() == c.edges.len() {
                assert_eq!(c.edges.len(), 2);
            }
        }
    }
}
