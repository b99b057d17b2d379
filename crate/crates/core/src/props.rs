//! Graph quantities: mas-number M, independence number α, domination number
//! γ, clique cover number 𝒞 and the stochastic mas-number M̄.
//!
//! Exact solvers work on `u64` adjacency masks and run up to a configurable
//! vertex cap; above it a greedy bound is returned and flagged inexact. The
//! greedy directions are chosen so that the chain γ ≤ α ≤ M ≤ 𝒞 degrades
//! gracefully: α is a lower bound, γ, M and 𝒞 are upper bounds.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::graph::{EdgeSpec, FeedbackGraph};

pub const DEFAULT_EXACT_CAP: usize = 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bound {
    pub value: usize,
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphProps {
    pub vertices: usize,
    pub mas: Bound,
    pub independence: Bound,
    pub domination: Bound,
    pub clique_cover: Bound,
    pub bar_mas: f64,
    pub bar_mas_exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverOptions {
    pub exact_cap: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            exact_cap: DEFAULT_EXACT_CAP,
        }
    }
}

impl SolverOptions {
    fn exact_for(&self, n: usize) -> bool {
        n <= self.exact_cap.min(63)
    }
}

pub fn graph_props(graph: &FeedbackGraph, opts: SolverOptions) -> GraphProps {
    let (bar_mas, bar_mas_exact) = bar_mas(graph, opts);
    GraphProps {
        vertices: graph.num_vertices(),
        mas: mas_number(graph, opts),
        independence: independence_number(graph, opts),
        domination: domination_number(graph, opts),
        clique_cover: clique_cover_number(graph, opts),
        bar_mas,
        bar_mas_exact,
    }
}

struct Masks {
    n: usize,
    out: Vec<u64>,
    inc: Vec<u64>,
}

impl Masks {
    fn new(graph: &FeedbackGraph) -> Self {
        let n = graph.num_vertices();
        let mut out = vec![0u64; n];
        let mut inc = vec![0u64; n];
        for (a, b) in graph.arcs() {
            out[a] |= 1 << b;
            inc[b] |= 1 << a;
        }
        Self { n, out, inc }
    }

    fn all(&self) -> u64 {
        if self.n == 64 {
            u64::MAX
        } else {
            (1u64 << self.n) - 1
        }
    }
}

fn bits(mut m: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let i = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(i)
        }
    })
}

/// Adjacency lists for the greedy fallbacks (any size).
struct Lists {
    n: usize,
    out: Vec<Vec<bool>>,
}

impl Lists {
    fn new(graph: &FeedbackGraph) -> Self {
        let n = graph.num_vertices();
        let mut out = vec![vec![false; n]; n];
        for (a, b) in graph.arcs() {
            out[a][b] = true;
        }
        Self { n, out }
    }

    fn adjacent(&self, a: usize, b: usize) -> bool {
        self.out[a][b] || self.out[b][a]
    }

    fn mutual(&self, a: usize, b: usize) -> bool {
        self.out[a][b] && self.out[b][a]
    }
}

// ---------------------------------------------------------------- mas-number

pub fn mas_number(graph: &FeedbackGraph, opts: SolverOptions) -> Bound {
    if opts.exact_for(graph.num_vertices()) {
        Bound {
            value: mas_exact(&Masks::new(graph)),
            exact: true,
        }
    } else {
        // M ≤ 𝒞, and the greedy clique cover bounds 𝒞 from above.
        Bound {
            value: greedy_clique_cover(&Lists::new(graph)),
            exact: false,
        }
    }
}

fn mas_exact(m: &Masks) -> usize {
    // Vertices with no in- or no out-edges never lie on a cycle.
    let free: u64 = (0..m.n)
        .filter(|&v| m.out[v] == 0 || m.inc[v] == 0)
        .fold(0, |acc, v| acc | 1 << v);
    let rest: Vec<usize> = bits(m.all() & !free).collect();
    let mut best = 0;
    mas_branch(m, &rest, 0, free, &mut best);
    best
}

fn mas_branch(m: &Masks, order: &[usize], idx: usize, chosen: u64, best: &mut usize) {
    let size = chosen.count_ones() as usize;
    if size + (order.len() - idx) <= *best {
        return;
    }
    if idx == order.len() {
        *best = size;
        return;
    }
    let v = order[idx];
    let with = chosen | 1 << v;
    if !on_cycle(m, with, v) {
        mas_branch(m, order, idx + 1, with, best);
    }
    mas_branch(m, order, idx + 1, chosen, best);
}

/// Whether `v` lies on a directed cycle inside the induced subgraph `set`.
/// Adding one vertex to an acyclic set can only create cycles through it.
fn on_cycle(m: &Masks, set: u64, v: usize) -> bool {
    let mut reach = m.out[v] & set;
    let mut frontier = reach;
    while frontier != 0 {
        if reach >> v & 1 == 1 {
            return true;
        }
        let mut next = 0;
        for u in bits(frontier) {
            next |= m.out[u] & set;
        }
        frontier = next & !reach;
        reach |= next;
    }
    reach >> v & 1 == 1
}

// ------------------------------------------------------ independence number

pub fn independence_number(graph: &FeedbackGraph, opts: SolverOptions) -> Bound {
    let n = graph.num_vertices();
    if opts.exact_for(n) {
        let m = Masks::new(graph);
        let nb: Vec<u64> = (0..n).map(|v| m.out[v] | m.inc[v]).collect();
        let mut best = 0;
        mis_branch(&nb, m.all(), 0, &mut best);
        Bound {
            value: best,
            exact: true,
        }
    } else {
        Bound {
            value: greedy_independent(&Lists::new(graph)),
            exact: false,
        }
    }
}

fn mis_branch(nb: &[u64], cands: u64, size: usize, best: &mut usize) {
    if size + cands.count_ones() as usize <= *best {
        return;
    }
    if cands == 0 {
        *best = size;
        return;
    }
    // branch on the candidate with most neighbours among candidates
    let (v, deg) = bits(cands)
        .map(|v| (v, (nb[v] & cands).count_ones()))
        .max_by_key(|&(v, d)| (d, std::cmp::Reverse(v)))
        .expect("nonempty");
    if deg == 0 {
        *best = (*best).max(size + cands.count_ones() as usize);
        return;
    }
    mis_branch(nb, cands & !nb[v] & !(1 << v), size + 1, best);
    mis_branch(nb, cands & !(1 << v), size, best);
}

fn greedy_independent(g: &Lists) -> usize {
    let mut alive = vec![true; g.n];
    let mut count = 0;
    loop {
        let pick = (0..g.n)
            .filter(|&v| alive[v])
            .min_by_key(|&v| (0..g.n).filter(|&u| alive[u] && u != v && g.adjacent(u, v)).count());
        let Some(v) = pick else { break };
        count += 1;
        alive[v] = false;
        for u in 0..g.n {
            if g.adjacent(u, v) {
                alive[u] = false;
            }
        }
    }
    count
}

// -------------------------------------------------------- domination number

pub fn domination_number(graph: &FeedbackGraph, opts: SolverOptions) -> Bound {
    let n = graph.num_vertices();
    if opts.exact_for(n) {
        let m = Masks::new(graph);
        let cover: Vec<u64> = (0..n).map(|v| m.out[v] | 1 << v).collect();
        let dominators: Vec<u64> = (0..n).map(|v| m.inc[v] | 1 << v).collect();
        let max_cover = cover.iter().map(|c| c.count_ones()).max().unwrap_or(1) as usize;
        let mut best = n;
        dom_branch(&cover, &dominators, max_cover, m.all(), 0, &mut best);
        Bound {
            value: best,
            exact: true,
        }
    } else {
        Bound {
            value: greedy_dominating(&Lists::new(graph)),
            exact: false,
        }
    }
}

fn dom_branch(
    cover: &[u64],
    dominators: &[u64],
    max_cover: usize,
    uncovered: u64,
    chosen: usize,
    best: &mut usize,
) {
    if uncovered == 0 {
        *best = (*best).min(chosen);
        return;
    }
    let lb = (uncovered.count_ones() as usize).div_ceil(max_cover);
    if chosen + lb >= *best {
        return;
    }
    // the uncovered vertex with fewest possible dominators
    let u = bits(uncovered)
        .min_by_key(|&u| dominators[u].count_ones())
        .expect("nonempty");
    for d in bits(dominators[u]) {
        dom_branch(cover, dominators, max_cover, uncovered & !cover[d], chosen + 1, best);
    }
}

fn greedy_dominating(g: &Lists) -> usize {
    let mut covered = vec![false; g.n];
    let mut count = 0;
    while covered.iter().any(|c| !c) {
        let gain = |v: usize| {
            (0..g.n)
                .filter(|&u| !covered[u] && (u == v || g.out[v][u]))
                .count()
        };
        let v = (0..g.n).max_by_key(|&v| (gain(v), std::cmp::Reverse(v))).expect("nonempty");
        covered[v] = true;
        for u in 0..g.n {
            if g.out[v][u] {
                covered[u] = true;
            }
        }
        count += 1;
    }
    count
}

// ------------------------------------------------------ clique cover number

pub fn clique_cover_number(graph: &FeedbackGraph, opts: SolverOptions) -> Bound {
    let n = graph.num_vertices();
    if opts.exact_for(n) {
        let m = Masks::new(graph);
        let mutual: Vec<u64> = (0..n).map(|v| m.out[v] & m.inc[v]).collect();
        let mut memo = HashMap::new();
        Bound {
            value: cover_exact(&mutual, m.all(), &mut memo),
            exact: true,
        }
    } else {
        Bound {
            value: greedy_clique_cover(&Lists::new(graph)),
            exact: false,
        }
    }
}

/// Minimum clique partition of `mask`. The part containing the lowest vertex
/// can be taken maximal within `mask` without loss.
fn cover_exact(mutual: &[u64], mask: u64, memo: &mut HashMap<u64, usize>) -> usize {
    if mask == 0 {
        return 0;
    }
    if let Some(&v) = memo.get(&mask) {
        return v;
    }
    let v = mask.trailing_zeros() as usize;
    let cand = mutual[v] & mask;
    let mut cliques = Vec::new();
    bron_kerbosch(mutual, 0, cand, 0, &mut cliques);
    let best = cliques
        .into_iter()
        .map(|k| 1 + cover_exact(mutual, mask & !(k | 1 << v), memo))
        .min()
        .expect("at least the empty extension");
    memo.insert(mask, best);
    best
}

/// Maximal cliques within `p` (Bron–Kerbosch with pivoting).
fn bron_kerbosch(adj: &[u64], r: u64, mut p: u64, mut x: u64, out: &mut Vec<u64>) {
    if p == 0 {
        if x == 0 {
            out.push(r);
        }
        return;
    }
    let pivot = bits(p | x)
        .max_by_key(|&u| (adj[u] & p).count_ones())
        .expect("nonempty");
    for v in bits(p & !adj[pivot]) {
        bron_kerbosch(adj, r | 1 << v, p & adj[v], x & adj[v], out);
        p &= !(1 << v);
        x |= 1 << v;
    }
}

fn greedy_clique_cover(g: &Lists) -> usize {
    let mut used = vec![false; g.n];
    let mut count = 0;
    for v in 0..g.n {
        if used[v] {
            continue;
        }
        let mut clique = vec![v];
        used[v] = true;
        for u in v + 1..g.n {
            if !used[u] && clique.iter().all(|&w| g.mutual(u, w)) {
                clique.push(u);
                used[u] = true;
            }
        }
        count += 1;
    }
    count
}

// ------------------------------------------------------- stochastic graphs

/// Keeps edges with `q ≥ ν`, resetting their probability to 1.
pub fn threshold_graph(graph: &FeedbackGraph, nu: f64) -> FeedbackGraph {
    let specs = graph
        .edge_specs()
        .into_iter()
        .filter(|e| e.2 >= nu)
        .map(|e| EdgeSpec(e.0, e.1, 1.0, e.3));
    FeedbackGraph::with_bias_seed(graph.num_vertices(), specs, graph.bias_seed())
        .expect("subgraph of a valid graph is valid")
}

/// `M̄ = min_ν M(G≥ν)/ν` over the distinct edge probabilities and `ν = 1`.
pub fn bar_mas(graph: &FeedbackGraph, opts: SolverOptions) -> (f64, bool) {
    let mut nus: Vec<f64> = graph.edge_specs().iter().map(|e| e.2).collect();
    nus.push(1.0);
    nus.sort_by(f64::total_cmp);
    nus.dedup();
    let mut best = f64::INFINITY;
    let mut exact = true;
    for nu in nus {
        let m = mas_number(&threshold_graph(graph, nu), opts);
        exact &= m.exact;
        best = best.min(m.value as f64 / nu);
    }
    (best, exact)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    fn directed_cycle(n: usize) -> FeedbackGraph {
        let arcs: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        FeedbackGraph::from_arcs(n, &arcs).unwrap()
    }

    #[test]
    fn edgeless_graph() {
        let g = FeedbackGraph::empty(7);
        let p = graph_props(&g, opts());
        assert_eq!(p.mas.value, 7);
        assert_eq!(p.independence.value, 7);
        assert_eq!(p.domination.value, 7);
        assert_eq!(p.clique_cover.value, 7);
        assert_eq!(p.bar_mas, 7.0);
    }

    #[test]
    fn cycle_needs_one_removal() {
        let g = directed_cycle(5);
        assert_eq!(mas_number(&g, opts()).value, 4);
        assert_eq!(independence_number(&g, opts()).value, 2);
        assert_eq!(domination_number(&g, opts()).value, 3);
        assert_eq!(clique_cover_number(&g, opts()).value, 5);
    }

    #[test]
    fn complete_graph_collapses() {
        let g = FeedbackGraph::complete(6);
        let p = graph_props(&g, opts());
        assert_eq!(
            (p.clique_cover.value, p.mas.value, p.independence.value, p.domination.value),
            (1, 1, 1, 1)
        );
    }

    #[test]
    fn threshold_filters_edges() {
        let g = FeedbackGraph::new(3, [EdgeSpec(0, 1, 0.3, 0.0), EdgeSpec(1, 2, 0.8, 0.1)]).unwrap();
        let t = threshold_graph(&g, 0.5);
        assert_eq!(t.edge_specs(), vec![EdgeSpec(1, 2, 1.0, 0.1)]);
        assert_eq!(threshold_graph(&g, 0.3).num_edges(), 2);
    }

    #[test]
    fn bar_mas_two_vertices() {
        let g = FeedbackGraph::new(2, [EdgeSpec(0, 1, 0.5, 0.0)]).unwrap();
        assert_eq!(bar_mas(&g, opts()), (2.0, true));
        // symmetric half-probability pair: M(G≥0.5)/0.5 = 2, M(G≥1) = 2
        let g = FeedbackGraph::new(2, [EdgeSpec(0, 1, 0.5, 0.0), EdgeSpec(1, 0, 0.5, 0.0)]).unwrap();
        assert_eq!(bar_mas(&g, opts()).0, 2.0);
        let g = FeedbackGraph::new(2, [EdgeSpec(0, 1, 0.8, 0.0), EdgeSpec(1, 0, 0.8, 0.0)]).unwrap();
        assert!((bar_mas(&g, opts()).0 - 1.25).abs() < 1e-12);
    }

    #[test]
    fn greedy_fallback_is_flagged_and_bounds_hold() {
        let g = directed_cycle(8);
        let small = SolverOptions { exact_cap: 4 };
        let m = mas_number(&g, small);
        assert!(!m.exact && m.value >= 7);
        let a = independence_number(&g, small);
        assert!(!a.exact && a.value <= 4);
        let d = domination_number(&g, small);
        assert!(!d.exact && d.value >= 4);
        let c = clique_cover_number(&g, small);
        assert!(!c.exact && c.value == 8);
    }
}
