//! Instance generators: random MDPs, a line-of-sight grid, the small example
//! graphs with known property values, and the two hard families.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{EdgeSpec, FeedbackGraph, GraphError};
use crate::mdp::{
    InitialStates, MdpError, PairId, RewardModel, StateActionSpace, StateId, TabularMdp,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, InstanceError> {
    Err(InstanceError::Invalid(msg.into()))
}

// ------------------------------------------------------------- random MDPs

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomMdpParams {
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
    /// Number of successor states per pair.
    pub support: usize,
    pub seed: u64,
}

/// Full state-action space, random successor sets with random weights,
/// Bernoulli rewards with uniform means, start in state 0.
pub fn random_mdp(p: &RandomMdpParams) -> Result<TabularMdp, InstanceError> {
    if p.support == 0 || p.support > p.states {
        return invalid(format!("support {} not in 1..={}", p.support, p.states));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let space = StateActionSpace::full(p.states, p.actions)?;
    let mut rows = Vec::with_capacity(space.num_pairs());
    let mut rewards = Vec::with_capacity(space.num_pairs());
    for _ in 0..space.num_pairs() {
        let succ = sample(&mut rng, p.states, p.support);
        let w: Vec<f64> = (0..p.support).map(|_| 0.05 + rng.gen::<f64>()).collect();
        let total: f64 = w.iter().sum();
        rows.push(succ.iter().zip(&w).map(|(s, &wi)| (s, wi / total)).collect());
        rewards.push(RewardModel::Bernoulli { mean: rng.gen() });
    }
    Ok(TabularMdp::new(
        space,
        p.horizon,
        rows,
        rewards,
        InitialStates::Fixed { state: 0 },
    )?)
}

/// Random directed graph with independent arcs of probability `density`.
pub fn random_graph<R: Rng + ?Sized>(n: usize, density: f64, rng: &mut R) -> FeedbackGraph {
    let mut arcs = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.gen::<f64>() < density {
                arcs.push((a, b));
            }
        }
    }
    FeedbackGraph::from_arcs(n, &arcs).expect("generated arcs are valid")
}

// -------------------------------------------------------- line-of-sight grid

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    pub width: usize,
    pub height: usize,
    /// Walls between adjacent cells, `[x1, y1, x2, y2]`.
    #[serde(default)]
    pub walls: Vec<[usize; 4]>,
    pub horizon: usize,
    /// Cell whose pairs pay Bernoulli(1); defaults to the far corner.
    #[serde(default)]
    pub goal: Option<(usize, usize)>,
    /// Probability that a move fails and the robot stays put.
    #[serde(default)]
    pub slip: f64,
}

pub const GRID_MOVES: [(isize, isize); 4] = [(0, -1), (1, 0), (0, 1), (-1, 0)];

/// Four-action grid; playing `(s, a)` also reveals `(s', a)` for every cell
/// `s'` in the same row or column with no wall in between.
pub fn grid_lineofsight(p: &GridParams) -> Result<(TabularMdp, FeedbackGraph), InstanceError> {
    let (w, h) = (p.width, p.height);
    if w == 0 || h == 0 {
        return invalid("grid must be nonempty");
    }
    if !(0.0..=1.0).contains(&p.slip) {
        return invalid("slip must lie in [0, 1]");
    }
    let cell = |x: usize, y: usize| y * w + x;
    let mut blocked = std::collections::HashSet::new();
    for &[x1, y1, x2, y2] in &p.walls {
        if x1 >= w || x2 >= w || y1 >= h || y2 >= h || x1.abs_diff(x2) + y1.abs_diff(y2) != 1 {
            return invalid(format!("wall [{x1}, {y1}, {x2}, {y2}] is not between adjacent cells"));
        }
        blocked.insert((cell(x1, y1), cell(x2, y2)));
        blocked.insert((cell(x2, y2), cell(x1, y1)));
    }
    let goal = p.goal.unwrap_or((w - 1, h - 1));
    if goal.0 >= w || goal.1 >= h {
        return invalid("goal outside the grid");
    }
    let ns = w * h;
    let space = StateActionSpace::full(ns, 4)?;
    let mut rows = Vec::with_capacity(4 * ns);
    let mut rewards = Vec::with_capacity(4 * ns);
    for y in 0..h {
        for x in 0..w {
            let s = cell(x, y);
            for (dx, dy) in GRID_MOVES {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                let target = if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                    let t = cell(nx as usize, ny as usize);
                    if blocked.contains(&(s, t)) {
                        s
                    } else {
                        t
                    }
                } else {
                    s
                };
                let row = if target == s || p.slip == 0.0 {
                    vec![(target, 1.0)]
                } else {
                    vec![(s, p.slip), (target, 1.0 - p.slip)]
                };
                rows.push(row);
                rewards.push(RewardModel::Bernoulli {
                    mean: if (x, y) == goal { 1.0 } else { 0.0 },
                });
            }
        }
    }
    let mdp = TabularMdp::new(space, p.horizon, rows, rewards, InitialStates::Fixed { state: 0 })?;

    // cells visible from each cell along rows and columns
    let mut edges = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let s = cell(x, y);
            for (dx, dy) in GRID_MOVES {
                let (mut cx, mut cy) = (x as isize, y as isize);
                loop {
                    let (nx, ny) = (cx + dx, cy + dy);
                    if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                        break;
                    }
                    let (from, to) = (cell(cx as usize, cy as usize), cell(nx as usize, ny as usize));
                    if blocked.contains(&(from, to)) {
                        break;
                    }
                    for a in 0..4 {
                        edges.push(EdgeSpec::plain(4 * s + a, 4 * to + a));
                    }
                    cx = nx;
                    cy = ny;
                }
            }
        }
    }
    let graph = FeedbackGraph::new(4 * ns, edges)?;
    Ok((mdp, graph))
}

// ------------------------------------------------------- example graphs

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedProps {
    pub clique_cover: usize,
    pub mas: usize,
    pub independence: usize,
    pub domination: usize,
}

#[derive(Debug, Clone)]
pub struct AppendixExample {
    pub name: &'static str,
    pub graph: FeedbackGraph,
    pub expected: ExpectedProps,
}

fn expected(c: usize, m: usize, a: usize, g: usize) -> ExpectedProps {
    ExpectedProps {
        clique_cover: c,
        mas: m,
        independence: a,
        domination: g,
    }
}

/// The four small example graphs with their published property values.
pub fn appendix_examples() -> Vec<AppendixExample> {
    let two_cliques = FeedbackGraph::cliques(8, &[vec![0, 1, 2, 3], vec![4, 5, 6, 7]])
        .expect("valid");
    let ordered_arcs: Vec<_> = (0..4).flat_map(|i| (0..i).map(move |j| (i, j))).collect();
    let ordered = FeedbackGraph::from_arcs(4, &ordered_arcs).expect("valid");
    let star_arcs: Vec<_> = (1..6).flat_map(|t| [(0, t), (t, 0)]).collect();
    let star = FeedbackGraph::from_arcs(6, &star_arcs).expect("valid");
    let general = FeedbackGraph::from_arcs(
        6,
        &[(0, 5), (1, 0), (1, 3), (3, 1), (4, 0), (5, 2), (5, 4)],
    )
    .expect("valid");
    vec![
        AppendixExample {
            name: "two-cliques",
            graph: two_cliques,
            expected: expected(2, 2, 2, 2),
        },
        AppendixExample {
            name: "ordered",
            graph: ordered,
            expected: expected(4, 4, 1, 1),
        },
        AppendixExample {
            name: "star",
            graph: star,
            expected: expected(5, 5, 5, 1),
        },
        AppendixExample {
            name: "general",
            graph: general,
            expected: expected(5, 4, 3, 2),
        },
    ]
}

/// Single-state MDP with one action per vertex, so any graph can be paired
/// with a compatible MDP.
pub fn bandit_for_graph(graph: &FeedbackGraph, horizon: usize) -> Result<TabularMdp, InstanceError> {
    let n = graph.num_vertices();
    Ok(TabularMdp::new(
        StateActionSpace::full(1, n)?,
        horizon,
        vec![vec![(0, 1.0)]; n],
        vec![RewardModel::Bernoulli { mean: 0.5 }; n],
        InitialStates::Fixed { state: 0 },
    )?)
}

// ------------------------------------------------------------ tree bandit

/// Smallest `d` with `base^d ≥ n`.
pub fn ceil_log(n: usize, base: usize) -> usize {
    let (mut d, mut reach) = (0, 1usize);
    while reach < n {
        reach = reach.saturating_mul(base);
        d += 1;
    }
    d
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeBanditParams {
    /// Number of leaf states; a power of `actions`.
    pub leaves: usize,
    pub actions: usize,
    pub horizon: usize,
    pub epsilon: f64,
    #[serde(default = "default_delta_good")]
    pub delta_good: f64,
    /// Index into the representative set of the optimal pair.
    #[serde(default)]
    pub optimal: usize,
    /// Clique groups over leaf pairs (indices `leaf·A + a`). Default: `alpha`
    /// contiguous groups, or singletons.
    #[serde(default)]
    pub groups: Option<Vec<Vec<usize>>>,
    #[serde(default)]
    pub alpha: Option<usize>,
}

fn default_delta_good() -> f64 {
    0.25
}

impl TreeBanditParams {
    /// Gap used by the regret lower bound for a known number of episodes.
    pub fn epsilon_for(alpha: usize, episodes: usize) -> f64 {
        0.25 * (alpha as f64 / (2.0 * episodes as f64)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeBanditMeta {
    pub depth: usize,
    pub h_bar: usize,
    pub leaf_pairs: Vec<PairId>,
    pub representatives: Vec<PairId>,
    pub optimal_pair: PairId,
    pub good_state: StateId,
    pub bad_state: StateId,
    pub v_star: f64,
}

#[derive(Debug, Clone)]
pub struct TreeBandit {
    pub mdp: TabularMdp,
    pub graph: FeedbackGraph,
    pub meta: TreeBanditMeta,
}

/// Full `A`-ary tree of depth `⌈log_A N⌉` with `N` leaf states. Leaf pairs
/// in the representative set reach the good state with probability `δ`
/// (`δ + ε` for the optimal one), all others go to the bad state. The good
/// state pays 1 per step. The graph is the given clique structure over leaf
/// pairs; other pairs have no edges.
pub fn tree_bandit(p: &TreeBanditParams) -> Result<TreeBandit, InstanceError> {
    let a = p.actions;
    if a < 2 {
        return invalid("need at least two actions");
    }
    let depth = ceil_log(p.leaves, a);
    if a.pow(depth as u32) != p.leaves {
        return invalid(format!("leaf count {} is not a power of {a}", p.leaves));
    }
    if p.horizon < 2 + 2 * depth {
        return invalid(format!("horizon {} below 2 + 2·log_A N = {}", p.horizon, 2 + 2 * depth));
    }
    if !(p.delta_good > 0.0 && p.epsilon >= 0.0 && p.epsilon <= 1.0 - 2.0 * p.delta_good) {
        return invalid("need δ > 0 and 0 ≤ ε ≤ 1 − 2δ");
    }
    let h_bar = p.horizon - 1 - depth;
    let num_leaf_pairs = p.leaves * a;
    let groups = match (&p.groups, p.alpha) {
        (Some(g), _) => g.clone(),
        (None, Some(alpha)) => {
            if alpha == 0 || num_leaf_pairs % alpha != 0 {
                return invalid(format!("α = {alpha} does not divide {num_leaf_pairs} leaf pairs"));
            }
            let size = num_leaf_pairs / alpha;
            (0..alpha).map(|g| (g * size..(g + 1) * size).collect()).collect()
        }
        (None, None) => (0..num_leaf_pairs).map(|i| vec![i]).collect(),
    };
    let mut seen = vec![false; num_leaf_pairs];
    for &i in groups.iter().flatten() {
        if i >= num_leaf_pairs || seen[i] {
            return invalid("groups must be disjoint leaf-pair indices");
        }
        seen[i] = true;
    }
    if groups.iter().any(Vec::is_empty) {
        return invalid("empty group");
    }
    if p.optimal >= groups.len() {
        return invalid("optimal index outside the representative set");
    }

    let internal = (p.leaves - 1) / (a - 1);
    let good = internal + p.leaves;
    let bad = good + 1;
    let ns = bad + 1;
    let space = StateActionSpace::full(ns, a)?;
    let pair = |s: StateId, act: usize| s * a + act;
    let leaf_pairs: Vec<PairId> = (0..num_leaf_pairs)
        .map(|i| pair(internal + i / a, i % a))
        .collect();
    let representatives: Vec<PairId> = groups.iter().map(|g| leaf_pairs[g[0]]).collect();
    let optimal_pair = representatives[p.optimal];

    let mut rows = Vec::with_capacity(ns * a);
    let mut rewards = Vec::with_capacity(ns * a);
    for s in 0..ns {
        for act in 0..a {
            let x = pair(s, act);
            let row = if s < internal {
                vec![(s * a + act + 1, 1.0)]
            } else if s < good {
                let q = if x == optimal_pair {
                    p.delta_good + p.epsilon
                } else if representatives.contains(&x) {
                    p.delta_good
                } else {
                    0.0
                };
                vec![(good, q), (bad, 1.0 - q)]
            } else {
                vec![(s, 1.0)]
            };
            rows.push(row);
            rewards.push(RewardModel::Bernoulli {
                mean: if s == good { 1.0 } else { 0.0 },
            });
        }
    }
    let mdp = TabularMdp::new(space, p.horizon, rows, rewards, InitialStates::Fixed { state: 0 })?;
    let cliques: Vec<Vec<PairId>> = groups
        .iter()
        .map(|g| g.iter().map(|&i| leaf_pairs[i]).collect())
        .collect();
    let graph = FeedbackGraph::cliques(ns * a, &cliques)?;
    Ok(TreeBandit {
        mdp,
        graph,
        meta: TreeBanditMeta {
            depth,
            h_bar,
            leaf_pairs,
            representatives,
            optimal_pair,
            good_state: good,
            bad_state: bad,
            v_star: (p.delta_good + p.epsilon) * h_bar as f64,
        },
    })
}

// ------------------------------------------------- dominating-set family

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DomHardCoverage {
    /// Only the published edges: each `d_i` into its share of `ℬ₁`.
    #[default]
    Minimal,
    /// Additionally every `d_i` observes every pair outside `ℬ₁ ∪ 𝒟`, so
    /// `𝒟` dominates the whole graph.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomHardParams {
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
    pub gamma: usize,
    pub p0: f64,
    pub epsilon: f64,
    /// `z_j` leads to the dominating tree (1-based).
    pub reach_index: usize,
    /// `x_k` is optimal (1-based).
    pub optimal_index: usize,
    #[serde(default)]
    pub coverage: DomHardCoverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomHardMeta {
    pub z: usize,
    pub z_bar: usize,
    pub b1: Vec<PairId>,
    pub b2: Vec<PairId>,
    pub dominating: Vec<PairId>,
    /// Vertices the published graph dominates: `ℬ₁ ∪ 𝒟`.
    pub dominated_scope: Vec<PairId>,
    pub coverage: DomHardCoverage,
    pub reach_probabilities: Vec<f64>,
    pub good_state: StateId,
    pub bad_state: StateId,
    pub v_star: f64,
}

#[derive(Debug, Clone)]
pub struct DomHard {
    pub mdp: TabularMdp,
    pub graph: FeedbackGraph,
    pub dominating: Vec<PairId>,
    pub meta: DomHardMeta,
}

/// Minimal `A`-ary tree with `leaves` leaf states: level sizes from the root.
fn tree_levels(leaves: usize, a: usize) -> Vec<usize> {
    let depth = ceil_log(leaves, a);
    (0..=depth)
        .map(|l| leaves.div_ceil(a.pow((depth - l) as u32)))
        .collect()
}

struct Tree {
    /// First state index of each level.
    offsets: Vec<usize>,
    sizes: Vec<usize>,
}

impl Tree {
    fn new(first: usize, leaves: usize, a: usize) -> Self {
        let sizes = tree_levels(leaves, a);
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut next = first;
        for &s in &sizes {
            offsets.push(next);
            next += s;
        }
        Self { offsets, sizes }
    }

    fn depth(&self) -> usize {
        self.sizes.len() - 1
    }

    fn len(&self) -> usize {
        self.sizes.iter().sum()
    }

    fn root(&self) -> StateId {
        self.offsets[0]
    }

    fn leaf(&self, i: usize) -> StateId {
        self.offsets[self.depth()] + i
    }

    /// Child of `(level, index)` under action `act`, if it exists.
    fn child(&self, level: usize, index: usize, act: usize, a: usize) -> Option<StateId> {
        let c = index * a + act;
        (c < self.sizes[level + 1]).then(|| self.offsets[level + 1] + c)
    }
}

/// Two deterministic trees: the main tree whose leaf pairs are `ℬ₁` (bandit
/// arms into good/bad) and `ℬ₂` (doors, one of which leads to the second
/// tree with probability `p₀`); the second tree's leaf pairs are `𝒟`. All
/// other transitions lead to the bad state.
pub fn domset_hard(p: &DomHardParams) -> Result<DomHard, InstanceError> {
    let a = p.actions;
    if a < 2 {
        return invalid("need at least two actions");
    }
    if p.states % 8 != 0 || p.states == 0 {
        return invalid("S must be a positive multiple of 8");
    }
    let z = p.states / 8;
    let z_bar = z * a;
    if p.gamma == 0 || z_bar % p.gamma != 0 {
        return invalid(format!("γ = {} must divide Z̄ = {z_bar}", p.gamma));
    }
    if !(p.p0 > 0.0 && p.p0 <= 1.0) {
        return invalid("p₀ must lie in (0, 1]");
    }
    if p.reach_index == 0 || p.reach_index > z_bar || p.optimal_index == 0 || p.optimal_index > z_bar {
        return invalid("instance indices must lie in 1..=Z̄");
    }
    let big_h = p.horizon as f64;
    if !(p.epsilon >= 0.0 && p.epsilon <= big_h) {
        return invalid("ε must lie in [0, H]");
    }

    let main = Tree::new(0, 2 * z, a);
    let dom = Tree::new(main.len(), p.gamma.div_ceil(a), a);
    let d1 = main.depth();
    let d2 = dom.depth();
    if p.horizon < d1 + d2 + 2 {
        return invalid(format!(
            "horizon {} cannot reach the dominating set (needs {})",
            p.horizon,
            d1 + d2 + 2
        ));
    }
    let good = main.len() + dom.len();
    let bad = good + 1;
    let ns = bad + 1;
    let pair = |s: StateId, act: usize| s * a + act;

    // leaf pair i of the main tree: ℬ₁ for i < Z̄, ℬ₂ after
    let main_leaf_pair = |i: usize| pair(main.leaf(i / a), i % a);
    let b1: Vec<PairId> = (0..z_bar).map(main_leaf_pair).collect();
    let b2: Vec<PairId> = (z_bar..2 * z_bar).map(main_leaf_pair).collect();
    let dominating: Vec<PairId> = (0..p.gamma).map(|i| pair(dom.leaf(i / a), i % a)).collect();
    let (k, j) = (p.optimal_index, p.reach_index);

    let mut rows: Vec<Vec<(StateId, f64)>> = vec![vec![(bad, 1.0)]; ns * a];
    let mut rewards = vec![RewardModel::Bernoulli { mean: 0.0 }; ns * a];
    for tree in [&main, &dom] {
        for level in 0..tree.depth() {
            for idx in 0..tree.sizes[level] {
                let s = tree.offsets[level] + idx;
                for act in 0..a {
                    if let Some(c) = tree.child(level, idx, act, a) {
                        rows[pair(s, act)] = vec![(c, 1.0)];
                    }
                }
            }
        }
    }
    for (i, &x) in b1.iter().enumerate() {
        let idx = i + 1;
        let g = if idx == k {
            0.5 + p.epsilon / big_h
        } else if idx == 1 {
            0.5 + p.epsilon / (2.0 * big_h)
        } else {
            0.5
        };
        rows[x] = vec![(good, g), (bad, 1.0 - g)];
    }
    let door = b2[j - 1];
    rows[door] = if p.p0 >= 1.0 {
        vec![(dom.root(), 1.0)]
    } else {
        vec![(dom.root(), p.p0), (bad, 1.0 - p.p0)]
    };
    for act in 0..a {
        rows[pair(good, act)] = vec![(good, 1.0)];
        rewards[pair(good, act)] = RewardModel::Bernoulli { mean: 1.0 };
    }
    let space = StateActionSpace::full(ns, a)?;
    let mdp = TabularMdp::new(space, p.horizon, rows, rewards, InitialStates::Fixed { state: 0 })?;

    let share = z_bar / p.gamma;
    let mut edges = Vec::new();
    for (i, &d) in dominating.iter().enumerate() {
        for &x in &b1[i * share..(i + 1) * share] {
            edges.push(EdgeSpec::plain(d, x));
        }
    }
    let mut scope: Vec<PairId> = b1.iter().chain(&dominating).copied().collect();
    scope.sort_unstable();
    if p.coverage == DomHardCoverage::Full {
        for &d in &dominating {
            for x in (0..ns * a).filter(|x| scope.binary_search(x).is_err()) {
                edges.push(EdgeSpec::plain(d, x));
            }
        }
    }
    let graph = FeedbackGraph::new(ns * a, edges)?;
    let residual = (p.horizon - d1 - 1) as f64;
    Ok(DomHard {
        mdp,
        graph,
        dominating: dominating.clone(),
        meta: DomHardMeta {
            z,
            z_bar,
            b1,
            b2,
            dominating,
            dominated_scope: scope,
            coverage: p.coverage,
            reach_probabilities: vec![p.p0; p.gamma],
            good_state: good,
            bad_state: bad,
            v_star: (0.5 + p.epsilon / big_h) * residual,
        },
    })
}

// -------------------------------------------------------------- star bandit

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarParams {
    pub leaf_means: Vec<f64>,
    #[serde(default)]
    pub center_mean: f64,
    pub horizon: usize,
}

#[derive(Debug, Clone)]
pub struct StarBandit {
    pub mdp: TabularMdp,
    pub graph: FeedbackGraph,
    pub center: PairId,
}

/// Single-state problem: action 0 is the uninformative-reward center that
/// observes every leaf; leaves observe nothing.
pub fn star_bandit(p: &StarParams) -> Result<StarBandit, InstanceError> {
    if p.leaf_means.is_empty() {
        return invalid("need at least one leaf");
    }
    let n = p.leaf_means.len() + 1;
    let rewards = std::iter::once(p.center_mean)
        .chain(p.leaf_means.iter().copied())
        .map(|mean| RewardModel::Bernoulli { mean })
        .collect();
    let mdp = TabularMdp::new(
        StateActionSpace::full(1, n)?,
        p.horizon,
        vec![vec![(0, 1.0)]; n],
        rewards,
        InitialStates::Fixed { state: 0 },
    )?;
    let arcs: Vec<_> = (1..n).map(|x| (0, x)).collect();
    Ok(StarBandit {
        mdp,
        graph: FeedbackGraph::from_arcs(n, &arcs)?,
        center: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{optimal_values, policy_value, Policy};

    #[test]
    fn random_rows_are_stochastic() {
        let mdp = random_mdp(&RandomMdpParams {
            states: 10,
            actions: 3,
            horizon: 4,
            support: 3,
            seed: 5,
        })
        .unwrap();
        assert_eq!(mdp.support_bound(), 3);
        assert_eq!(mdp.num_pairs(), 30);
    }

    #[test]
    fn single_cell_grid_has_no_edges() {
        let (mdp, g) = grid_lineofsight(&GridParams {
            width: 1,
            height: 1,
            walls: vec![],
            horizon: 2,
            goal: None,
            slip: 0.0,
        })
        .unwrap();
        assert_eq!(mdp.num_pairs(), 4);
        assert_eq!(g.num_edges(), 0);
    }

    #[test]
    fn corridor_line_of_sight() {
        let params = GridParams {
            width: 3,
            height: 1,
            walls: vec![],
            horizon: 3,
            goal: None,
            slip: 0.0,
        };
        let (_, g) = grid_lineofsight(&params).unwrap();
        // every cell sees the two others, once per action
        for x in 0..12 {
            assert_eq!(g.out_edges(x).len(), 2);
        }
        let walled = GridParams {
            walls: vec![[1, 0, 2, 0]],
            ..params
        };
        let (_, gw) = grid_lineofsight(&walled).unwrap();
        // crossing edges: 0<->2 and 1<->2, both directions, 4 actions
        assert_eq!(g.num_edges() - gw.num_edges(), 16);
        assert!(!gw.has_edge(4, 8) && gw.has_edge(0, 4));
    }

    #[test]
    fn tree_bandit_depth_one_has_2n_plus_1_states() {
        let tb = tree_bandit(&TreeBanditParams {
            leaves: 2,
            actions: 2,
            horizon: 4,
            epsilon: 0.1,
            delta_good: 0.25,
            optimal: 0,
            groups: None,
            alpha: None,
        })
        .unwrap();
        assert_eq!(tb.mdp.num_states(), 5);
        assert_eq!(tb.meta.h_bar, 2);
    }

    #[test]
    fn tree_bandit_values() {
        let tb = tree_bandit(&TreeBanditParams {
            leaves: 4,
            actions: 2,
            horizon: 7,
            epsilon: 0.2,
            delta_good: 0.25,
            optimal: 1,
            groups: None,
            alpha: Some(4),
        })
        .unwrap();
        let (opt, _) = optimal_values(&tb.mdp);
        assert!((opt.v(0, 0) - 0.45 * 4.0).abs() < 1e-12);
        assert!((tb.meta.v_star - 0.45 * 4.0).abs() < 1e-12);
        // play the first representative (suboptimal): δ·H̄
        let rep = tb.meta.representatives[0];
        let (leaf, act) = tb.mdp.space().pair(rep);
        let path = leaf - 3; // leaf index; root=0, level1 = 1,2
        let policy = Policy::from_fn(7, tb.mdp.num_states(), |s, _| {
            Some(match s {
                0 => path / 2,
                1 | 2 => path % 2,
                s if s == leaf => act,
                _ => 0,
            })
        });
        let v = policy_value(&tb.mdp, &policy).unwrap();
        assert!((v.v(0, 0) - 0.25 * 4.0).abs() < 1e-12);
    }

    #[test]
    fn domset_hard_structure() {
        let p = DomHardParams {
            states: 16,
            actions: 2,
            horizon: 6,
            gamma: 2,
            p0: 0.5,
            epsilon: 0.6,
            reach_index: 2,
            optimal_index: 3,
            coverage: DomHardCoverage::Minimal,
        };
        let dh = domset_hard(&p).unwrap();
        assert_eq!((dh.meta.z, dh.meta.z_bar), (2, 4));
        assert_eq!(dh.dominating.len(), 2);
        let (opt, _) = optimal_values(&dh.mdp);
        assert!((opt.v(0, 0) - dh.meta.v_star).abs() < 1e-12);
        for &x in &dh.meta.b1 {
            assert!(dh.dominating.iter().any(|&d| dh.graph.has_edge(d, x)));
        }
    }

    #[test]
    fn domset_hard_degenerate_share() {
        let dh = domset_hard(&DomHardParams {
            states: 8,
            actions: 2,
            horizon: 6,
            gamma: 2,
            p0: 1.0,
            epsilon: 0.0,
            reach_index: 1,
            optimal_index: 1,
            coverage: DomHardCoverage::Minimal,
        })
        .unwrap();
        for &d in &dh.dominating {
            assert_eq!(dh.graph.out_edges(d).len(), 1);
        }
    }
}
