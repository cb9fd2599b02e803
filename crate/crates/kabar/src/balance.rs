//! Balancing: reduce the number of overloaded nodes by at least one per
//! invocation with minimum cut damage. Routes between the s-t balancing
//! model (with path integration), a BFS-forest fallback, and a random move
//! for blocks stranded in separate connected components.

use rand::prelude::*;

use crate::advanced::{self, AdvancedModel, EdgePayload, ModelKind};
use crate::dls::{self, PackedSearches};
use crate::error::KabarError;
use crate::graph::{Graph, NodeId, Weight};
use crate::model;
use crate::partition::{BlockId, EligibilityState, Partition};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BalanceMethod {
    PathModel,
    Fallback,
    RandomMove,
    NoOp,
}

#[derive(Debug, Clone)]
pub struct BalanceOutcome {
    pub method: BalanceMethod,
    pub cut_delta: Weight,
    pub overload_before: u32,
    pub overload_after: u32,
}

/// BFS forest over the quotient graph, seeded with the overloaded blocks
/// in random order. `parent[b]` is the predecessor block, `parent[root]`
/// is the root itself.
struct QuotientForest {
    parent: Vec<Option<BlockId>>,
    order: Vec<BlockId>,
}

fn quotient_bfs_forest<R: Rng>(p: &Partition, g: &Graph, rng: &mut R) -> QuotientForest {
    let k = p.k();
    let mut adj = vec![Vec::new(); k];
    for (a, b) in p.quotient_edges(g) {
        adj[a as usize].push(b);
    }
    let mut roots: Vec<BlockId> = (0..k as BlockId).filter(|&b| p.is_overloaded(b)).collect();
    roots.shuffle(rng);
    let mut parent: Vec<Option<BlockId>> = vec![None; k];
    let mut queue = std::collections::VecDeque::new();
    for &r in &roots {
        parent[r as usize] = Some(r);
        queue.push_back(r);
    }
    let mut order = Vec::new();
    while let Some(b) = queue.pop_front() {
        order.push(b);
        for &c in &adj[b as usize] {
            if parent[c as usize].is_none() {
                parent[c as usize] = Some(b);
                queue.push_back(c);
            }
        }
    }
    QuotientForest { parent, order }
}

impl QuotientForest {
    /// Path root -> ... -> target read off the parent links.
    fn path_to(&self, target: BlockId) -> Vec<BlockId> {
        let mut path = vec![target];
        let mut cur = target;
        while let Some(par) = self.parent[cur as usize] {
            if par == cur {
                break;
            }
            path.push(par);
            cur = par;
        }
        path.reverse();
        path
    }
}

/// Tries to guarantee an s-t path by running τ=1 searches along a forest
/// path from an overloaded block to a capacious one first. On failure all
/// marks are cleared and the next random capacious block is tried.
/// Returns the block path plus the seeded search state on success.
fn integrate_path<R: Rng>(
    g: &Graph,
    p: &mut Partition,
    forest: &QuotientForest,
    rng: &mut R,
) -> Option<(Vec<BlockId>, EligibilityState, PackedSearches)> {
    let mut candidates: Vec<BlockId> = forest
        .order
        .iter()
        .copied()
        .filter(|&b| p.slack(b) >= 1)
        .collect();
    candidates.shuffle(rng);
    for target in candidates {
        let path = forest.path_to(target);
        if path.len() < 2 {
            continue;
        }
        let mut elig = EligibilityState::new(g.num_nodes());
        let mut packed = PackedSearches::default();
        let mut ok = true;
        for w in path.windows(2) {
            let seq = dls::directed_local_search(g, p, w[0], w[1], 1, &mut elig, rng);
            if seq.is_empty() {
                ok = false;
                break;
            }
            packed.merge_sequence(&seq);
        }
        if ok {
            return Some((path, elig, packed));
        }
        // undo: every node is eligible again
    }
    None
}

/// BFS-forest fallback: simulate moving one maximum-gain node across each
/// consecutive pair of every root-to-capacious path, keep the path with the
/// smallest resulting cut. Nodes are not eligibility-blocked here, so a
/// usable node always exists along a quotient path.
fn fallback_balance<R: Rng>(
    g: &Graph,
    p: &mut Partition,
    forest: &QuotientForest,
    rng: &mut R,
) -> Result<BalanceOutcome, KabarError> {
    let overload_before = p.total_overload();
    let targets: Vec<BlockId> = forest
        .order
        .iter()
        .copied()
        .filter(|&b| p.slack(b) >= 1)
        .collect();
    let mut best: Option<(Weight, Vec<(NodeId, BlockId)>)> = None;
    for target in targets {
        let path = forest.path_to(target);
        if path.len() < 2 {
            continue;
        }
        let mut moves: Vec<(NodeId, BlockId)> = Vec::new();
        let mut undo: Vec<(NodeId, BlockId)> = Vec::new();
        let mut feasible = true;
        for w in path.windows(2) {
            let (x, y) = (w[0], w[1]);
            let mut cands: Vec<(Weight, NodeId)> = (0..g.num_nodes() as NodeId)
                .filter(|&v| p.block_of(v) == x)
                .map(|v| (p.gain(g, v, y), v))
                .collect();
            let Some(&(max_gain, _)) = cands.iter().max_by_key(|&&(gain, _)| gain) else {
                feasible = false;
                break;
            };
            cands.retain(|&(gain, _)| gain == max_gain);
            let &(_, v) = cands.choose(rng).unwrap();
            undo.push((v, x));
            p.move_node(g, v, y);
            moves.push((v, y));
        }
        let resulting_cut = p.cut();
        for &(v, b) in undo.iter().rev() {
            p.move_node(g, v, b);
        }
        if feasible && best.as_ref().map_or(true, |(c, _)| resulting_cut < *c) {
            best = Some((resulting_cut, moves));
        }
    }
    let Some((_, moves)) = best else {
        return Err(KabarError::Internal(
            "fallback balance found no quotient path".into(),
        ));
    };
    let cut_before = p.cut();
    // a node may travel through several blocks along the path, so the
    // moves are replayed in order rather than applied as a batch
    for &(v, b) in &moves {
        p.move_node(g, v, b);
    }
    let overload_after = p.total_overload();
    debug_assert_eq!(overload_after + 1, overload_before);
    Ok(BalanceOutcome {
        method: BalanceMethod::Fallback,
        cut_delta: p.cut() - cut_before,
        overload_before,
        overload_after,
    })
}

/// Handles blocks stranded without a quotient path: one random node moves
/// from an overloaded block to an underloaded one.
fn move_random<R: Rng>(
    g: &Graph,
    p: &mut Partition,
    rng: &mut R,
) -> Result<BalanceOutcome, KabarError> {
    let overload_before = p.total_overload();
    let overloaded: Vec<BlockId> = (0..p.k() as BlockId).filter(|&b| p.is_overloaded(b)).collect();
    let underloaded: Vec<BlockId> = (0..p.k() as BlockId).filter(|&b| p.slack(b) >= 1).collect();
    let (&from, &to) = match (overloaded.choose(rng), underloaded.choose(rng)) {
        (Some(f), Some(t)) => (f, t),
        _ => {
            return Err(KabarError::Internal(
                "overloaded partition without an underloaded block".into(),
            ))
        }
    };
    let nodes: Vec<NodeId> = (0..g.num_nodes() as NodeId)
        .filter(|&v| p.block_of(v) == from)
        .collect();
    let &v = nodes.choose(rng).unwrap();
    let cut_before = p.cut();
    p.move_node(g, v, to);
    Ok(BalanceOutcome {
        method: BalanceMethod::RandomMove,
        cut_delta: p.cut() - cut_before,
        overload_before,
        overload_after: p.total_overload(),
    })
}

/// Applies the minimum-weight s-t path of the balancing model built over
/// the integrated searches. Conflicted paths lose a random payload edge
/// and the search restarts; when s-t connectivity is lost the fallback
/// takes over.
fn path_model_balance<R: Rng>(
    g: &Graph,
    p: &mut Partition,
    mut am: AdvancedModel,
    rng: &mut R,
) -> Result<Option<BalanceOutcome>, KabarError> {
    let overload_before = p.total_overload();
    let t = am.t.expect("balancing model must carry t");
    loop {
        let path = match model::shortest_s_t_path(&am.mg, am.s, t) {
            Ok(Some(path)) => path,
            // disconnected or (rarely) a negative cycle surfaced by the
            // fresh searches: let the caller fall back
            Ok(None) | Err(_) => return Ok(None),
        };
        let mut reject = advanced::check_edges(p, &am, &path.edges).is_some();
        if !reject {
            // the path must actually reduce overload
            let moves = am.moves_for_edges(&path.edges);
            let mut sizes: Vec<i64> = p.block_sizes().iter().map(|&s| s as i64).collect();
            for m in &moves {
                sizes[m.from as usize] -= 1;
                sizes[m.to as usize] += 1;
            }
            let cap = p.ceil_cap() as i64;
            let after: i64 = sizes.iter().map(|&s| (s - cap).max(0)).sum();
            if after >= overload_before as i64 {
                reject = true;
            }
        }
        if reject {
            let payload: Vec<_> = path
                .edges
                .iter()
                .copied()
                .filter(|&e| matches!(am.payload(e), EdgePayload::Prefix { .. }))
                .collect();
            match payload.choose(rng) {
                Some(&victim) => {
                    am.mg.disable_edge(victim);
                    continue;
                }
                None => return Ok(None),
            }
        }
        let moves = am.moves_for_edges(&path.edges);
        let cut_before = p.cut();
        let gain = p.apply_node_moves(g, &moves)?;
        if -gain != path.weight {
            return Err(KabarError::Internal(format!(
                "balancing path predicted delta {} but realized {}",
                path.weight, -gain
            )));
        }
        return Ok(Some(BalanceOutcome {
            method: BalanceMethod::PathModel,
            cut_delta: p.cut() - cut_before,
            overload_before,
            overload_after: p.total_overload(),
        }));
    }
}

/// One balancing step: total overload decreases by at least one. With
/// τ = 1 this is basic balancing, with τ > 1 advanced balancing.
pub fn balance_step<R: Rng>(
    g: &Graph,
    p: &mut Partition,
    tau: usize,
    mu: usize,
    conflict_free: bool,
    rng: &mut R,
) -> Result<BalanceOutcome, KabarError> {
    if p.is_perfectly_balanced() {
        return Ok(BalanceOutcome {
            method: BalanceMethod::NoOp,
            cut_delta: 0,
            overload_before: 0,
            overload_after: 0,
        });
    }
    let forest = quotient_bfs_forest(p, g, rng);
    let reachable_capacious = forest.order.iter().any(|&b| p.slack(b) >= 1);
    if !reachable_capacious {
        return move_random(g, p, rng);
    }
    if let Some((_, mut elig, mut packed)) = integrate_path(g, p, &forest, rng) {
        let pairs = p.quotient_edges(g);
        dls::pack_searches_into(g, p, &pairs, tau, mu, &mut elig, rng, &mut packed);
        let am = advanced::build_advanced_model(p, &packed, tau, ModelKind::Balancing, conflict_free);
        if let Some(outcome) = path_model_balance(g, p, am, rng)? {
            debug_assert!(outcome.overload_after < outcome.overload_before);
            return Ok(outcome);
        }
    }
    fallback_balance(g, p, &forest, rng)
}
