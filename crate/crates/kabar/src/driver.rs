//! The round loop tying refinement and balancing together, plus the seeded
//! region-growing partitioner and the deterministic portfolio runner.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::advanced::{self, ModelKind};
use crate::balance::{self, BalanceMethod};
use crate::basic;
use crate::dls;
use crate::error::KabarError;
use crate::graph::{Graph, NodeId, Weight};
use crate::model;
use crate::partition::{ceil_div, BlockId, EligibilityState, Partition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mode {
    Basic,
    Advanced,
}

#[derive(Debug, Clone, Serialize)]
pub struct RefineConfig {
    /// Maximum moves per directed local search.
    pub tau: usize,
    /// Packing iterations.
    pub mu: usize,
    /// Unsuccessful iterations before a balancing step (or termination).
    pub lambda: usize,
    pub mode: Mode,
    pub zero_cycle_diversification: bool,
    pub seed: u64,
    pub max_zero_cycles_per_solve: usize,
    pub conflict_free: bool,
}

impl RefineConfig {
    /// Defaults: μ = 20, τ = 15 for k ≤ 8 else 7, λ = 3.
    pub fn defaults_for_k(k: usize) -> RefineConfig {
        RefineConfig {
            tau: if k <= 8 { 15 } else { 7 },
            mu: 20,
            lambda: 3,
            mode: Mode::Advanced,
            zero_cycle_diversification: true,
            seed: 0,
            max_zero_cycles_per_solve: 10,
            conflict_free: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EventKind {
    NegativeCycle,
    ZeroCycle,
    Balance,
}

/// One applied model cycle or balancing path, with the delta the model
/// predicted and the delta the partition actually realized.
#[derive(Debug, Clone, Serialize)]
pub struct TraceEvent {
    pub kind: EventKind,
    pub predicted_delta: Weight,
    pub realized_delta: Weight,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RefineTrace {
    pub events: Vec<TraceEvent>,
    pub iterations: usize,
    pub balance_steps: usize,
}

fn basic_negative_step(
    g: &Graph,
    p: &mut Partition,
    rng: &mut ChaCha8Rng,
    trace: &mut RefineTrace,
) -> Result<bool, KabarError> {
    let bm = basic::build_basic_model(g, p, rng);
    let Some(cycle) = model::detect_negative_cycle(&bm.mg, bm.s) else {
        return Ok(false);
    };
    let before = p.cut();
    let delta = basic::apply_cycle(g, p, &bm, &cycle)?;
    trace.events.push(TraceEvent {
        kind: EventKind::NegativeCycle,
        predicted_delta: cycle.weight,
        realized_delta: p.cut() - before,
    });
    debug_assert_eq!(delta, cycle.weight);
    Ok(true)
}

fn advanced_negative_step(
    g: &Graph,
    p: &mut Partition,
    cfg: &RefineConfig,
    rng: &mut ChaCha8Rng,
    trace: &mut RefineTrace,
) -> Result<bool, KabarError> {
    let pairs = p.quotient_edges(g);
    let mut elig = EligibilityState::new(g.num_nodes());
    let packed = dls::pack_searches(g, p, &pairs, cfg.tau, cfg.mu, &mut elig, rng);
    let mut am = advanced::build_advanced_model(
        p,
        &packed,
        cfg.tau,
        ModelKind::Refinement,
        cfg.conflict_free,
    );
    let Some((moves, delta)) = advanced::solve_advanced(p, &mut am, rng) else {
        return Ok(false);
    };
    let before = p.cut();
    advanced::apply_advanced_cycle(g, p, &moves, delta)?;
    trace.events.push(TraceEvent {
        kind: EventKind::NegativeCycle,
        predicted_delta: delta,
        realized_delta: p.cut() - before,
    });
    Ok(true)
}

/// One zero-weight-cycle diversification move on a freshly built model.
/// Skipped when the fresh model still contains a negative cycle (the next
/// negative step will consume it first).
fn zero_cycle_step(
    g: &Graph,
    p: &mut Partition,
    cfg: &RefineConfig,
    rng: &mut ChaCha8Rng,
    trace: &mut RefineTrace,
) -> Result<bool, KabarError> {
    match cfg.mode {
        Mode::Basic => {
            let bm = basic::build_basic_model(g, p, rng);
            if model::detect_negative_cycle(&bm.mg, bm.s).is_some() {
                return Ok(false);
            }
            let pot = model::shortest_path_tree(&bm.mg, bm.s)?;
            let Some(cycle) = model::find_zero_weight_cycle(&bm.mg, &pot, rng) else {
                return Ok(false);
            };
            let before = p.cut();
            basic::apply_cycle(g, p, &bm, &cycle)?;
            trace.events.push(TraceEvent {
                kind: EventKind::ZeroCycle,
                predicted_delta: 0,
                realized_delta: p.cut() - before,
            });
            Ok(true)
        }
        Mode::Advanced => {
            let pairs = p.quotient_edges(g);
            let mut elig = EligibilityState::new(g.num_nodes());
            let packed = dls::pack_searches(g, p, &pairs, cfg.tau, cfg.mu, &mut elig, rng);
            let mut am = advanced::build_advanced_model(
                p,
                &packed,
                cfg.tau,
                ModelKind::Refinement,
                cfg.conflict_free,
            );
            if model::detect_negative_cycle(&am.mg, am.s).is_some() {
                return Ok(false);
            }
            // conflicted zero cycles lose an edge and we retry, like the
            // negative case
            loop {
                let pot = model::shortest_path_tree(&am.mg, am.s)?;
                let Some(cycle) = model::find_zero_weight_cycle(&am.mg, &pot, rng) else {
                    return Ok(false);
                };
                if advanced::check_cycle(p, &am, &cycle).is_some() {
                    let payload: Vec<_> = cycle
                        .edges
                        .iter()
                        .copied()
                        .filter(|&e| {
                            matches!(am.payload(e), advanced::EdgePayload::Prefix { .. })
                        })
                        .collect();
                    match payload.choose(rng) {
                        Some(&victim) => {
                            am.mg.disable_edge(victim);
                            continue;
                        }
                        None => return Ok(false),
                    }
                }
                let moves = am.moves_for_edges(&cycle.edges);
                let before = p.cut();
                advanced::apply_advanced_cycle(g, p, &moves, cycle.weight)?;
                trace.events.push(TraceEvent {
                    kind: EventKind::ZeroCycle,
                    predicted_delta: 0,
                    realized_delta: p.cut() - before,
                });
                return Ok(true);
            }
        }
    }
}

/// Refines `p0` until no further negative cycle is found for `lambda`
/// consecutive iterations; while the partition is overloaded each such
/// stall triggers one balancing step instead of terminating. The output is
/// perfectly balanced and, for perfectly balanced inputs, never worse.
pub fn kabar_refine(
    g: &Graph,
    p0: &Partition,
    cfg: &RefineConfig,
) -> Result<(Partition, RefineTrace), KabarError> {
    let mut p = p0.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = RefineTrace::default();
    let mut unsuccessful = 0usize;
    loop {
        trace.iterations += 1;
        let cut_before = p.cut();
        let mut zero_budget = if cfg.zero_cycle_diversification {
            cfg.max_zero_cycles_per_solve
        } else {
            0
        };
        loop {
            let applied = match cfg.mode {
                Mode::Basic => basic_negative_step(g, &mut p, &mut rng, &mut trace)?,
                Mode::Advanced => advanced_negative_step(g, &mut p, cfg, &mut rng, &mut trace)?,
            };
            if zero_budget > 0 && zero_cycle_step(g, &mut p, cfg, &mut rng, &mut trace)? {
                zero_budget -= 1;
            }
            if !applied {
                break;
            }
        }
        if p.cut() < cut_before {
            unsuccessful = 0;
        } else {
            unsuccessful += 1;
        }
        if unsuccessful >= cfg.lambda {
            if p.is_perfectly_balanced() {
                break;
            }
            let balance_tau = match cfg.mode {
                Mode::Basic => 1,
                Mode::Advanced => cfg.tau,
            };
            let before = p.cut();
            let outcome =
                balance::balance_step(g, &mut p, balance_tau, cfg.mu, cfg.conflict_free, &mut rng)?;
            if outcome.method != BalanceMethod::NoOp {
                trace.balance_steps += 1;
                trace.events.push(TraceEvent {
                    kind: EventKind::Balance,
                    predicted_delta: outcome.cut_delta,
                    realized_delta: p.cut() - before,
                });
            }
            unsuccessful = 0;
        }
    }
    debug_assert!(p.is_perfectly_balanced());
    Ok((p, trace))
}

/// BFS region growing from k random seeds under the (1+ε) capacity;
/// leftovers go to the least-loaded adjacent block, else the least-loaded
/// block overall.
pub fn seed_partition<R: Rng>(
    g: &Graph,
    k: usize,
    epsilon: f64,
    rng: &mut R,
) -> Result<Partition, KabarError> {
    let n = g.num_nodes();
    if k == 0 || k > n {
        return Err(KabarError::InvalidInput(format!(
            "k={k} must be in 1..={n}"
        )));
    }
    let l_max = ((1.0 + epsilon) * ceil_div(n, k) as f64).ceil() as u32;
    let mut assign = vec![u32::MAX; n];
    let mut sizes = vec![0u32; k];
    let mut seeds: Vec<NodeId> = (0..n as NodeId).collect();
    seeds.shuffle(rng);
    let mut frontiers: Vec<std::collections::VecDeque<NodeId>> =
        (0..k).map(|_| std::collections::VecDeque::new()).collect();
    for (b, &s) in seeds[..k].iter().enumerate() {
        assign[s as usize] = b as u32;
        sizes[b] += 1;
        frontiers[b].push_back(s);
    }
    let mut active = true;
    while active {
        active = false;
        for b in 0..k {
            if sizes[b] >= l_max {
                continue;
            }
            while let Some(v) = frontiers[b].pop_front() {
                let mut grew = false;
                for (u, _) in g.neighbors(v) {
                    if assign[u as usize] == u32::MAX {
                        assign[u as usize] = b as u32;
                        sizes[b] += 1;
                        frontiers[b].push_back(u);
                        grew = true;
                        break;
                    }
                }
                if grew {
                    // re-visit v later; it may have more unassigned neighbors
                    frontiers[b].push_front(v);
                    active = true;
                    break;
                }
            }
        }
    }
    // leftovers: capacity-blocked or in unseeded components
    let mut leftover: Vec<NodeId> = (0..n as NodeId)
        .filter(|&v| assign[v as usize] == u32::MAX)
        .collect();
    leftover.shuffle(rng);
    for v in leftover {
        let mut candidate: Option<BlockId> = None;
        for (u, _) in g.neighbors(v) {
            let b = assign[u as usize];
            if b != u32::MAX && sizes[b as usize] < l_max {
                if candidate.map_or(true, |c| sizes[b as usize] < sizes[c as usize]) {
                    candidate = Some(b);
                }
            }
        }
        let b = candidate.unwrap_or_else(|| {
            (0..k as BlockId)
                .filter(|&b| sizes[b as usize] < l_max)
                .min_by_key(|&b| sizes[b as usize])
                .expect("capacity accounting guarantees a free block")
        });
        assign[v as usize] = b;
        sizes[b as usize] += 1;
    }
    Partition::from_assignment(g, k, epsilon, assign)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialMetrics {
    pub trial: usize,
    pub seed: u64,
    pub epsilon_used: f64,
    pub tau: usize,
    pub mu: usize,
    pub lambda: usize,
    pub cut: Weight,
    pub max_block_size: u32,
    pub perfectly_balanced: bool,
    pub iterations: usize,
    pub balance_steps: usize,
    pub event_deltas: Vec<Weight>,
    pub wall_ms: u128,
}

/// Runs independent seeded pipelines (seed partition + refine) and returns
/// the minimum-cut perfectly balanced result. Trial parameters ε' ∈
/// [0.005, ε_max], τ ∈ [1,30], μ ∈ [1,20], λ ∈ [1,10] are drawn per trial
/// from the trial's own seed, so the outcome does not depend on the thread
/// count.
pub fn portfolio_run(
    g: &Graph,
    k: usize,
    trials: usize,
    eps_max: f64,
    base: &RefineConfig,
    threads: usize,
) -> Result<(Partition, Vec<TrialMetrics>), KabarError> {
    if trials == 0 {
        return Err(KabarError::InvalidInput("trials must be >= 1".into()));
    }
    let run_trial = |trial: usize| -> Result<(Partition, TrialMetrics), KabarError> {
        let start = std::time::Instant::now();
        let trial_seed = base
            .seed
            .wrapping_add((trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
        let eps_hi = eps_max.max(0.005);
        let eps = rng.gen_range(0.005..=eps_hi);
        let mut cfg = base.clone();
        cfg.seed = trial_seed ^ 0x5bd1_e995;
        if trials > 1 {
            cfg.tau = rng.gen_range(1..=30);
            cfg.mu = rng.gen_range(1..=20);
            cfg.lambda = rng.gen_range(1..=10);
        }
        let p0 = seed_partition(g, k, eps, &mut rng)?;
        let (p, trace) = kabar_refine(g, &p0, &cfg)?;
        let metrics = TrialMetrics {
            trial,
            seed: trial_seed,
            epsilon_used: eps,
            tau: cfg.tau,
            mu: cfg.mu,
            lambda: cfg.lambda,
            cut: p.cut(),
            max_block_size: p.block_sizes().iter().copied().max().unwrap_or(0),
            perfectly_balanced: p.is_perfectly_balanced(),
            iterations: trace.iterations,
            balance_steps: trace.balance_steps,
            event_deltas: trace.events.iter().map(|e| e.realized_delta).collect(),
            wall_ms: start.elapsed().as_millis(),
        };
        Ok((p, metrics))
    };

    let results: Vec<Result<(Partition, TrialMetrics), KabarError>> = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| KabarError::Internal(format!("thread pool: {e}")))?;
        pool.install(|| {
            use rayon::prelude::*;
            (0..trials).into_par_iter().map(run_trial).collect()
        })
    } else {
        (0..trials).map(run_trial).collect()
    };

    let mut best: Option<(usize, Partition)> = None;
    let mut all_metrics = Vec::with_capacity(trials);
    for (trial, r) in results.into_iter().enumerate() {
        let (p, m) = r?;
        // ties broken by lowest trial index for determinism
        if best
            .as_ref()
            .map_or(true, |(_, bp)| p.cut() < bp.cut())
        {
            best = Some((trial, p));
        }
        all_metrics.push(m);
    }
    Ok((best.unwrap().1, all_metrics))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_connected(seed: u64, n: usize, extra: usize) -> Graph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for v in 1..n {
            edges.push((rng.gen_range(0..v) as NodeId, v as NodeId, 1));
        }
        for _ in 0..extra {
            edges.push((
                rng.gen_range(0..n) as NodeId,
                rng.gen_range(0..n) as NodeId,
                1,
            ));
        }
        Graph::from_edges(n, &edges).unwrap()
    }

    #[test]
    fn seed_partition_k1_and_kn() {
        let g = random_connected(1, 10, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = seed_partition(&g, 1, 0.0, &mut rng).unwrap();
        assert_eq!(p.cut(), 0);
        assert_eq!(p.block_size(0), 10);
        let p = seed_partition(&g, 10, 0.0, &mut rng).unwrap();
        assert!(p.block_sizes().iter().all(|&s| s == 1));
        assert_eq!(p.cut(), g.total_edge_weight());
    }

    #[test]
    fn seed_partition_respects_cap() {
        for seed in 0..20 {
            let g = random_connected(seed, 37, 40);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xff);
            let p = seed_partition(&g, 4, 0.04, &mut rng).unwrap();
            let cap = ((1.04f64) * ceil_div(37, 4) as f64).ceil() as u32;
            assert!(p.block_sizes().iter().all(|&s| s <= cap));
        }
    }

    #[test]
    fn refine_balances_imbalanced_input() {
        for seed in 0..5 {
            let g = random_connected(seed + 50, 60, 80);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p0 = seed_partition(&g, 4, 0.10, &mut rng).unwrap();
            let mut cfg = RefineConfig::defaults_for_k(4);
            cfg.seed = seed;
            cfg.tau = 5;
            cfg.mu = 3;
            let (p, _) = kabar_refine(&g, &p0, &cfg).unwrap();
            assert!(p.is_perfectly_balanced());
            assert_eq!(p.cut(), p.recompute_cut(&g));
        }
    }

    #[test]
    fn refine_monotone_on_balanced_input() {
        for seed in 0..5 {
            let g = random_connected(seed + 90, 40, 50);
            let assign = (0..40).map(|v| (v % 4) as BlockId).collect();
            let p0 = Partition::from_assignment(&g, 4, 0.0, assign).unwrap();
            let mut cfg = RefineConfig::defaults_for_k(4);
            cfg.seed = seed;
            cfg.tau = 4;
            cfg.mu = 3;
            let (p, _) = kabar_refine(&g, &p0, &cfg).unwrap();
            assert!(p.cut() <= p0.cut());
            assert!(p.is_perfectly_balanced());
        }
    }

    #[test]
    fn refine_deterministic() {
        let g = random_connected(7, 50, 60);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p0 = seed_partition(&g, 4, 0.08, &mut rng).unwrap();
        let mut cfg = RefineConfig::defaults_for_k(4);
        cfg.seed = 99;
        cfg.tau = 6;
        cfg.mu = 4;
        let (a, _) = kabar_refine(&g, &p0, &cfg).unwrap();
        let (b, _) = kabar_refine(&g, &p0, &cfg).unwrap();
        assert_eq!(a.assignment(), b.assignment());
    }

    #[test]
    fn portfolio_best_leq_all_trials() {
        let g = random_connected(13, 40, 50);
        let mut cfg = RefineConfig::defaults_for_k(4);
        cfg.tau = 4;
        cfg.mu = 2;
        cfg.seed = 5;
        let (best, metrics) = portfolio_run(&g, 4, 8, 0.05, &cfg, 1).unwrap();
        assert!(best.is_perfectly_balanced());
        for m in &metrics {
            assert!(best.cut() <= m.cut);
            assert!(m.perfectly_balanced);
        }
    }

    #[test]
    fn portfolio_thread_count_invariant() {
        let g = random_connected(21, 36, 40);
        let mut cfg = RefineConfig::defaults_for_k(3);
        cfg.tau = 3;
        cfg.mu = 2;
        cfg.seed = 11;
        let (a, _) = portfolio_run(&g, 3, 6, 0.05, &cfg, 1).unwrap();
        let (b, _) = portfolio_run(&g, 3, 6, 0.05, &cfg, 3).unwrap();
        assert_eq!(a.assignment(), b.assignment());
    }

    #[test]
    fn refine_handles_disconnected_graph() {
        // two components, overload stuck in one of them
        let mut edges = Vec::new();
        for v in 1..12u32 {
            edges.push((v - 1, v, 1));
        }
        for v in 13..24u32 {
            edges.push((v - 1, v, 1));
        }
        let g = Graph::from_edges(24, &edges).unwrap();
        // k=4, cap 6; block 0 takes 8 nodes of component one
        let mut assign = vec![0u32; 24];
        for (i, a) in assign.iter_mut().enumerate() {
            *a = match i {
                0..=7 => 0,
                8..=11 => 1,
                12..=17 => 2,
                _ => 3,
            };
        }
        let p0 = Partition::from_assignment(&g, 4, 0.35, assign).unwrap();
        assert!(!p0.is_perfectly_balanced());
        let mut cfg = RefineConfig::defaults_for_k(4);
        cfg.tau = 3;
        cfg.mu = 2;
        let (p, _) = kabar_refine(&g, &p0, &cfg).unwrap();
        assert!(p.is_perfectly_balanced());
    }
}
