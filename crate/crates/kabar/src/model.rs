//! Shortest-path machinery on the layered model graphs: negative-cycle
//! detection (Bellman-Ford with subtree disassembly), shortest-path trees
//! under negative edge weights, zero-weight-cycle extraction via strongly
//! connected components of the zero-reduced-cost subgraph, and s-t paths.

use rand::prelude::*;

use crate::error::KabarError;
use crate::graph::Weight;

pub type ModelNodeId = u32;
pub type EdgeId = usize;

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelEdge {
    pub from: ModelNodeId,
    pub to: ModelNodeId,
    pub weight: Weight,
}

/// Directed graph with possibly negative edge weights. Edges can be
/// disabled in place, which is how conflict resolution prunes a model
/// without rebuilding it.
#[derive(Debug, Clone)]
pub struct ModelGraph {
    num_nodes: usize,
    edges: Vec<ModelEdge>,
    out: Vec<Vec<EdgeId>>,
    disabled: Vec<bool>,
}

impl ModelGraph {
    pub fn new(num_nodes: usize) -> ModelGraph {
        ModelGraph {
            num_nodes,
            edges: Vec::new(),
            out: vec![Vec::new(); num_nodes],
            disabled: Vec::new(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn add_edge(&mut self, from: ModelNodeId, to: ModelNodeId, weight: Weight) -> EdgeId {
        let id = self.edges.len();
        self.edges.push(ModelEdge { from, to, weight });
        self.out[from as usize].push(id);
        self.disabled.push(false);
        id
    }

    pub fn edge(&self, id: EdgeId) -> &ModelEdge {
        &self.edges[id]
    }

    pub fn disable_edge(&mut self, id: EdgeId) {
        self.disabled[id] = true;
    }

    pub fn is_disabled(&self, id: EdgeId) -> bool {
        self.disabled[id]
    }

    pub fn out_edges(&self, v: ModelNodeId) -> impl Iterator<Item = (EdgeId, &ModelEdge)> + '_ {
        self.out[v as usize]
            .iter()
            .copied()
            .filter(|&id| !self.disabled[id])
            .map(|id| (id, &self.edges[id]))
    }
}

/// A closed directed walk given as an ordered edge list.
#[derive(Debug, Clone)]
pub struct CycleResult {
    pub edges: Vec<EdgeId>,
    pub weight: Weight,
}

impl CycleResult {
    /// Checks closure and that the stated weight equals the edge-weight sum.
    pub fn validate(&self, mg: &ModelGraph) -> bool {
        if self.edges.is_empty() {
            return false;
        }
        let mut sum = 0;
        for i in 0..self.edges.len() {
            let e = mg.edge(self.edges[i]);
            let next = mg.edge(self.edges[(i + 1) % self.edges.len()]);
            if e.to != next.from {
                return false;
            }
            sum += e.weight;
        }
        sum == self.weight
    }
}

/// Shortest-path distances from the virtual source. `None` marks nodes the
/// source cannot reach.
#[derive(Debug, Clone)]
pub struct Potentials {
    dist: Vec<Option<Weight>>,
}

impl Potentials {
    pub fn get(&self, v: ModelNodeId) -> Option<Weight> {
        self.dist[v as usize]
    }

    /// ℓ(e) = ω(e) + Π(from) − Π(to); `None` when an endpoint is unreachable.
    pub fn reduced_cost(&self, e: &ModelEdge) -> Option<Weight> {
        Some(e.weight + self.dist[e.from as usize]? - self.dist[e.to as usize]?)
    }
}

#[derive(Debug, Clone)]
pub struct PathResult {
    pub edges: Vec<EdgeId>,
    pub weight: Weight,
}

/// Shared label-correcting core: FIFO Bellman-Ford maintaining an explicit
/// shortest-path tree with subtree disassembly. When a relaxation of (u,v)
/// finds u inside the current subtree of v, the tree path v -> ... -> u plus
/// the relaxing edge is a negative cycle.
struct Labeling {
    dist: Vec<Weight>,
    reached: Vec<bool>,
    in_tree: Vec<bool>,
    in_queue: Vec<bool>,
    parent: Vec<u32>,
    parent_edge: Vec<EdgeId>,
    first_child: Vec<u32>,
    next_sib: Vec<u32>,
    prev_sib: Vec<u32>,
}

impl Labeling {
    fn new(n: usize) -> Labeling {
        Labeling {
            dist: vec![0; n],
            reached: vec![false; n],
            in_tree: vec![false; n],
            in_queue: vec![false; n],
            parent: vec![NONE; n],
            parent_edge: vec![usize::MAX; n],
            first_child: vec![NONE; n],
            next_sib: vec![NONE; n],
            prev_sib: vec![NONE; n],
        }
    }

    fn detach(&mut self, c: u32) {
        let pr = self.prev_sib[c as usize];
        let nx = self.next_sib[c as usize];
        if pr != NONE {
            self.next_sib[pr as usize] = nx;
        } else if self.parent[c as usize] != NONE {
            self.first_child[self.parent[c as usize] as usize] = nx;
        }
        if nx != NONE {
            self.prev_sib[nx as usize] = pr;
        }
        self.prev_sib[c as usize] = NONE;
        self.next_sib[c as usize] = NONE;
        self.parent[c as usize] = NONE;
    }

    fn attach(&mut self, c: u32, p: u32, via: EdgeId) {
        let head = self.first_child[p as usize];
        self.next_sib[c as usize] = head;
        self.prev_sib[c as usize] = NONE;
        if head != NONE {
            self.prev_sib[head as usize] = c;
        }
        self.first_child[p as usize] = c;
        self.parent[c as usize] = p;
        self.parent_edge[c as usize] = via;
        self.in_tree[c as usize] = true;
    }

    /// Removes the whole subtree rooted at `v` (except `v` itself) from the
    /// tree. Returns true if `target` was found inside, in which case the
    /// tree is left untouched so the cycle can be read off the parent links.
    fn disassemble_subtree(&mut self, v: u32, target: u32) -> bool {
        if v == target {
            return true;
        }
        // first pass: containment check
        let mut stack = vec![v];
        let mut members = Vec::new();
        while let Some(x) = stack.pop() {
            let mut c = self.first_child[x as usize];
            while c != NONE {
                if c == target {
                    return true;
                }
                members.push(c);
                stack.push(c);
                c = self.next_sib[c as usize];
            }
        }
        for &w in &members {
            self.parent[w as usize] = NONE;
            self.prev_sib[w as usize] = NONE;
            self.next_sib[w as usize] = NONE;
            self.first_child[w as usize] = NONE;
            self.in_tree[w as usize] = false;
        }
        self.first_child[v as usize] = NONE;
        false
    }

    /// Reads the cycle closed by relaxing edge `closing` = (u, v): tree path
    /// from v down to u, then the closing edge back to v.
    fn extract_cycle(&self, mg: &ModelGraph, closing: EdgeId) -> CycleResult {
        let u = mg.edge(closing).from;
        let v = mg.edge(closing).to;
        let mut rev = vec![closing];
        let mut cur = u;
        while cur != v {
            let pe = self.parent_edge[cur as usize];
            rev.push(pe);
            cur = self.parent[cur as usize];
        }
        rev.reverse();
        let weight = rev.iter().map(|&e| mg.edge(e).weight).sum();
        CycleResult { edges: rev, weight }
    }
}

enum RunOutcome {
    Done(Labeling),
    NegativeCycle(CycleResult),
}

fn run_labeling(mg: &ModelGraph, s: ModelNodeId) -> RunOutcome {
    let n = mg.num_nodes();
    let mut lab = Labeling::new(n);
    lab.dist[s as usize] = 0;
    lab.reached[s as usize] = true;
    lab.in_tree[s as usize] = true;
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(s);
    lab.in_queue[s as usize] = true;

    while let Some(u) = queue.pop_front() {
        lab.in_queue[u as usize] = false;
        // disassembled nodes carry stale labels; they re-enter the queue
        // once an ancestor improves them again
        if !lab.in_tree[u as usize] {
            continue;
        }
        for (eid, e) in mg.out_edges(u) {
            let v = e.to;
            let cand = lab.dist[u as usize] + e.weight;
            if !lab.reached[v as usize] || cand < lab.dist[v as usize] {
                if lab.reached[v as usize]
                    && lab.in_tree[v as usize]
                    && lab.disassemble_subtree(v, u)
                {
                    let cycle = lab.extract_cycle(mg, eid);
                    debug_assert!(cycle.weight < 0);
                    debug_assert!(cycle.validate(mg));
                    return RunOutcome::NegativeCycle(cycle);
                }
                if lab.in_tree[v as usize] {
                    lab.detach(v);
                }
                lab.dist[v as usize] = cand;
                lab.reached[v as usize] = true;
                lab.attach(v, u, eid);
                if !lab.in_queue[v as usize] {
                    queue.push_back(v);
                    lab.in_queue[v as usize] = true;
                }
            }
        }
    }
    RunOutcome::Done(lab)
}

/// Returns some negative-weight cycle reachable from `s`, or `None` when no
/// such cycle exists. Which cycle is returned is unspecified.
pub fn detect_negative_cycle(mg: &ModelGraph, s: ModelNodeId) -> Option<CycleResult> {
    match run_labeling(mg, s) {
        RunOutcome::Done(_) => None,
        RunOutcome::NegativeCycle(c) => Some(c),
    }
}

/// Computes shortest-path distances from `s`. Fails if a negative cycle is
/// reachable (the caller is expected to have ruled that out).
pub fn shortest_path_tree(mg: &ModelGraph, s: ModelNodeId) -> Result<Potentials, KabarError> {
    match run_labeling(mg, s) {
        RunOutcome::Done(lab) => {
            let dist = (0..mg.num_nodes())
                .map(|v| lab.reached[v].then_some(lab.dist[v]))
                .collect();
            Ok(Potentials { dist })
        }
        RunOutcome::NegativeCycle(_) => Err(KabarError::Internal(
            "shortest_path_tree called on a model with a negative cycle".into(),
        )),
    }
}

/// Minimum-weight s-t path, or `None` when t is unreachable. Fails if a
/// negative cycle is reachable from `s`.
pub fn shortest_s_t_path(
    mg: &ModelGraph,
    s: ModelNodeId,
    t: ModelNodeId,
) -> Result<Option<PathResult>, KabarError> {
    match run_labeling(mg, s) {
        RunOutcome::Done(lab) => {
            if !lab.reached[t as usize] {
                return Ok(None);
            }
            let mut edges = Vec::new();
            let mut cur = t;
            while cur != s {
                let pe = lab.parent_edge[cur as usize];
                edges.push(pe);
                cur = lab.parent[cur as usize];
            }
            edges.reverse();
            Ok(Some(PathResult {
                edges,
                weight: lab.dist[t as usize],
            }))
        }
        RunOutcome::NegativeCycle(_) => Err(KabarError::Internal(
            "shortest_s_t_path called on a model with a negative cycle".into(),
        )),
    }
}

/// Iterative Tarjan over an edge-filtered view. Returns a component id per
/// node (dense, reachable-or-not alike) plus component sizes.
fn strongly_connected_components(
    num_nodes: usize,
    adj: &[Vec<(ModelNodeId, EdgeId)>],
) -> (Vec<u32>, Vec<u32>) {
    let mut index = vec![NONE; num_nodes];
    let mut lowlink = vec![0u32; num_nodes];
    let mut on_stack = vec![false; num_nodes];
    let mut comp = vec![NONE; num_nodes];
    let mut sizes = Vec::new();
    let mut stack: Vec<u32> = Vec::new();
    let mut next_index = 0u32;
    let mut comp_count = 0u32;
    // call stack: (node, next child offset)
    let mut work: Vec<(u32, usize)> = Vec::new();

    for root in 0..num_nodes as u32 {
        if index[root as usize] != NONE {
            continue;
        }
        work.push((root, 0));
        while let Some(&mut (v, ref mut ci)) = work.last_mut() {
            if *ci == 0 {
                index[v as usize] = next_index;
                lowlink[v as usize] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v as usize] = true;
            }
            let mut recursed = false;
            while *ci < adj[v as usize].len() {
                let (w, _) = adj[v as usize][*ci];
                *ci += 1;
                if index[w as usize] == NONE {
                    work.push((w, 0));
                    recursed = true;
                    break;
                } else if on_stack[w as usize] {
                    lowlink[v as usize] = lowlink[v as usize].min(index[w as usize]);
                }
            }
            if recursed {
                continue;
            }
            if lowlink[v as usize] == index[v as usize] {
                let mut size = 0u32;
                loop {
                    let w = stack.pop().unwrap();
                    on_stack[w as usize] = false;
                    comp[w as usize] = comp_count;
                    size += 1;
                    if w == v {
                        break;
                    }
                }
                sizes.push(size);
                comp_count += 1;
            }
            work.pop();
            if let Some(&mut (p, _)) = work.last_mut() {
                lowlink[p as usize] = lowlink[p as usize].min(lowlink[v as usize]);
            }
        }
    }
    (comp, sizes)
}

/// Finds a cycle of total ω-weight zero, if any exists, given valid
/// potentials from a negative-cycle-free run. Edges with positive reduced
/// cost cannot lie on such a cycle and are evicted; a zero-weight cycle
/// exists iff the remaining subgraph has a strongly connected component
/// with more than one node. A random walk inside such a component yields
/// the cycle.
pub fn find_zero_weight_cycle<R: Rng>(
    mg: &ModelGraph,
    pot: &Potentials,
    rng: &mut R,
) -> Option<CycleResult> {
    let n = mg.num_nodes();
    let mut adj: Vec<Vec<(ModelNodeId, EdgeId)>> = vec![Vec::new(); n];
    for v in 0..n as u32 {
        if pot.get(v).is_none() {
            continue;
        }
        for (eid, e) in mg.out_edges(v) {
            if pot.reduced_cost(e) == Some(0) {
                adj[v as usize].push((e.to, eid));
            }
        }
    }
    let (comp, sizes) = strongly_connected_components(n, &adj);
    let big: Vec<u32> = (0..sizes.len() as u32).filter(|&c| sizes[c as usize] > 1).collect();
    let &chosen = big.choose(rng)?;
    let members: Vec<u32> = (0..n as u32).filter(|&v| comp[v as usize] == chosen).collect();
    let start = *members.choose(rng).unwrap();

    // random walk within the component until a node repeats
    let mut pos = vec![NONE; n];
    let mut nodes = vec![start];
    let mut walk_edges: Vec<EdgeId> = Vec::new();
    pos[start as usize] = 0;
    let mut cur = start;
    loop {
        let candidates: Vec<(ModelNodeId, EdgeId)> = adj[cur as usize]
            .iter()
            .copied()
            .filter(|&(w, _)| comp[w as usize] == chosen)
            .collect();
        let &(next, eid) = candidates.choose(rng).expect("scc node without internal out-edge");
        walk_edges.push(eid);
        if pos[next as usize] != NONE {
            let j = pos[next as usize] as usize;
            let edges: Vec<EdgeId> = walk_edges[j..].to_vec();
            let weight: Weight = edges.iter().map(|&e| mg.edge(e).weight).sum();
            let cycle = CycleResult { edges, weight };
            debug_assert_eq!(cycle.weight, 0);
            debug_assert!(cycle.validate(mg));
            return Some(cycle);
        }
        pos[next as usize] = nodes.len() as u32;
        nodes.push(next);
        cur = next;
    }
}
