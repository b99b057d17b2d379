//! Feedback graphs over state-action pairs and the observation model.
//!
//! An edge `x -> y` with probability `q` means that whenever the agent plays
//! `x` it additionally receives, with probability `q`, a fresh sample of the
//! transition at `y`. Self-observation is implicit and never stored as an edge.
//! An edge may carry a bias bound `ε'`; samples through it come from a
//! perturbed model whose reward mean and kernel deviate by at most `ε'`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{sample_row, PairId, StateId, TabularMdp};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("self-loop on vertex {0}; self-observation is implicit")]
    SelfLoop(PairId),
    #[error("edge ({from}, {to}) leaves the vertex range 0..{num_vertices}")]
    VertexOutOfRange {
        from: PairId,
        to: PairId,
        num_vertices: usize,
    },
    #[error("edge ({from}, {to}) has probability {q} outside (0, 1]")]
    BadProbability { from: PairId, to: PairId, q: f64 },
    #[error("edge ({from}, {to}) has invalid bias bound {bias}")]
    BadBias { from: PairId, to: PairId, bias: f64 },
    #[error("edge ({from}, {to}) is listed twice")]
    DuplicateEdge { from: PairId, to: PairId },
    #[error("graph has {graph} vertices but the MDP has {mdp} pairs")]
    SizeMismatch { graph: usize, mdp: usize },
}

/// Edge description as it appears in instance files: `(from, to, q, bias)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec(pub PairId, pub PairId, pub f64, pub f64);

impl EdgeSpec {
    pub fn plain(from: PairId, to: PairId) -> Self {
        Self(from, to, 1.0, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub target: PairId,
    pub prob: f64,
    pub bias: f64,
    /// Seeded reward offset direction in `[-1, 1]`, scaled by `bias`.
    shift: f64,
    /// Seeded choice of the kernel perturbation's target within the support.
    pick: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackGraph {
    num_vertices: usize,
    out: Vec<Vec<Edge>>,
    bias_seed: u64,
}

impl FeedbackGraph {
    pub fn new(
        num_vertices: usize,
        edges: impl IntoIterator<Item = EdgeSpec>,
    ) -> Result<Self, GraphError> {
        Self::with_bias_seed(num_vertices, edges, 0)
    }

    pub fn with_bias_seed(
        num_vertices: usize,
        edges: impl IntoIterator<Item = EdgeSpec>,
        bias_seed: u64,
    ) -> Result<Self, GraphError> {
        let mut out: Vec<Vec<Edge>> = vec![Vec::new(); num_vertices];
        for EdgeSpec(from, to, q, bias) in edges {
            if from >= num_vertices || to >= num_vertices {
                return Err(GraphError::VertexOutOfRange {
                    from,
                    to,
                    num_vertices,
                });
            }
            if from == to {
                return Err(GraphError::SelfLoop(from));
            }
            if !(q > 0.0 && q <= 1.0) {
                return Err(GraphError::BadProbability { from, to, q });
            }
            if !(bias.is_finite() && bias >= 0.0) {
                return Err(GraphError::BadBias { from, to, bias });
            }
            out[from].push(Edge {
                target: to,
                prob: q,
                bias,
                shift: 0.0,
                pick: 0,
            });
        }
        for (from, edges) in out.iter_mut().enumerate() {
            edges.sort_by_key(|e| e.target);
            if let Some(w) = edges.windows(2).find(|w| w[0].target == w[1].target) {
                return Err(GraphError::DuplicateEdge {
                    from,
                    to: w[0].target,
                });
            }
        }
        let mut graph = Self {
            num_vertices,
            out,
            bias_seed,
        };
        graph.draw_perturbations();
        Ok(graph)
    }

    /// Per-edge perturbation draws are a function of the seed and the edge
    /// list only, fixed at construction.
    fn draw_perturbations(&mut self) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.bias_seed);
        for edges in &mut self.out {
            for e in edges.iter_mut() {
                e.shift = rng.gen_range(-1.0..=1.0);
                e.pick = rng.gen();
            }
        }
    }

    pub fn empty(num_vertices: usize) -> Self {
        Self::new(num_vertices, std::iter::empty()).expect("empty graph is valid")
    }

    /// Every ordered pair of distinct vertices, `q = 1`.
    pub fn complete(num_vertices: usize) -> Self {
        let edges = (0..num_vertices).flat_map(|a| {
            (0..num_vertices)
                .filter(move |&b| b != a)
                .map(move |b| EdgeSpec::plain(a, b))
        });
        Self::new(num_vertices, edges).expect("complete graph is valid")
    }

    /// Deterministic unbiased graph from an arc list.
    pub fn from_arcs(
        num_vertices: usize,
        arcs: &[(PairId, PairId)],
    ) -> Result<Self, GraphError> {
        Self::new(num_vertices, arcs.iter().map(|&(a, b)| EdgeSpec::plain(a, b)))
    }

    /// Disjoint cliques (mutual edges) over the given groups.
    pub fn cliques(num_vertices: usize, groups: &[Vec<PairId>]) -> Result<Self, GraphError> {
        let mut arcs = Vec::new();
        for g in groups {
            for &a in g {
                for &b in g {
                    if a != b {
                        arcs.push((a, b));
                    }
                }
            }
        }
        Self::from_arcs(num_vertices, &arcs)
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn bias_seed(&self) -> u64 {
        self.bias_seed
    }

    pub fn out_edges(&self, x: PairId) -> &[Edge] {
        &self.out[x]
    }

    pub fn num_edges(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    pub fn edge(&self, from: PairId, to: PairId) -> Option<&Edge> {
        self.out[from]
            .binary_search_by_key(&to, |e| e.target)
            .ok()
            .map(|i| &self.out[from][i])
    }

    pub fn has_edge(&self, from: PairId, to: PairId) -> bool {
        self.edge(from, to).is_some()
    }

    pub fn edge_specs(&self) -> Vec<EdgeSpec> {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(from, es)| es.iter().map(move |e| EdgeSpec(from, e.target, e.prob, e.bias)))
            .collect()
    }

    pub fn arcs(&self) -> Vec<(PairId, PairId)> {
        self.edge_specs().into_iter().map(|e| (e.0, e.1)).collect()
    }

    pub fn is_deterministic(&self) -> bool {
        self.out.iter().flatten().all(|e| e.prob >= 1.0)
    }

    /// Same graph with `edge` removed (no-op if absent).
    pub fn without_edge(&self, from: PairId, to: PairId) -> Self {
        let specs = self
            .edge_specs()
            .into_iter()
            .filter(|e| !(e.0 == from && e.1 == to));
        Self::with_bias_seed(self.num_vertices, specs, self.bias_seed)
            .expect("subgraph of a valid graph is valid")
    }

    /// `N_G(x) = {x} ∪ {y : y -> x}` for every vertex.
    pub fn closed_in_neighborhoods(&self) -> Vec<Vec<PairId>> {
        let mut nb: Vec<Vec<PairId>> = (0..self.num_vertices).map(|x| vec![x]).collect();
        for (from, es) in self.out.iter().enumerate() {
            for e in es {
                nb[e.target].push(from);
            }
        }
        for v in &mut nb {
            v.sort_unstable();
        }
        nb
    }

    pub fn check_compatible(&self, mdp: &TabularMdp) -> Result<(), GraphError> {
        if self.num_vertices != mdp.num_pairs() {
            return Err(GraphError::SizeMismatch {
                graph: self.num_vertices,
                mdp: mdp.num_pairs(),
            });
        }
        Ok(())
    }

    /// The observation set for playing `current.pair`: the agent's own
    /// transition plus one fresh sample per realized out-edge.
    ///
    /// Edge realizations are independent; edges with `q = 1` consume no
    /// randomness for the inclusion decision.
    pub fn observe<R: Rng + ?Sized>(
        &self,
        mdp: &TabularMdp,
        current: Observation,
        rng: &mut R,
    ) -> ObservationSet {
        let mut set = ObservationSet {
            items: Vec::with_capacity(1 + self.out[current.pair].len()),
        };
        set.items.push(Observation {
            bias: 0.0,
            ..current
        });
        for e in &self.out[current.pair] {
            if e.prob < 1.0 && rng.gen::<f64>() >= e.prob {
                continue;
            }
            let (reward, next_state) = if e.bias > 0.0 {
                biased_sample(mdp, e, rng)
            } else {
                mdp.sample_transition(e.target, rng)
            };
            set.items.push(Observation {
                pair: e.target,
                reward,
                next_state,
                bias: e.bias,
            });
        }
        set
    }
}

/// Sample of the perturbed model behind a biased edge.
///
/// Reward: with probability `λ = |shift|·ε'` the draw is replaced by 1 when
/// the shift is positive and 0 otherwise, moving the mean by at most `λ ≤ ε'`. Kernel: with
/// probability `μ = min(1, ε'/2)` the next state is a seeded support state, so
/// `‖P̃ − P‖₁ ≤ 2μ ≤ ε'`.
fn biased_sample<R: Rng + ?Sized>(mdp: &TabularMdp, e: &Edge, rng: &mut R) -> (f64, StateId) {
    let x = e.target;
    let mut reward = mdp.reward_model(x).sample(rng);
    let lambda = (e.shift.abs() * e.bias).min(1.0);
    if rng.gen::<f64>() < lambda {
        reward = if e.shift > 0.0 { 1.0 } else { 0.0 };
    }
    let row = mdp.transition(x);
    let mu = (0.5 * e.bias).min(1.0);
    let next = if rng.gen::<f64>() < mu {
        row[(e.pick % row.len() as u64) as usize].0
    } else {
        sample_row(row, rng)
    };
    (reward, next)
}

/// Mean reward and kernel of the perturbed model behind edge `from -> to`.
/// Exposed so tests can check the bias bounds analytically.
pub fn biased_model(
    graph: &FeedbackGraph,
    mdp: &TabularMdp,
    from: PairId,
    to: PairId,
) -> Option<(f64, Vec<(StateId, f64)>)> {
    let e = graph.edge(from, to)?;
    let r = mdp.mean_reward(to);
    let lambda = (e.shift.abs() * e.bias).min(1.0);
    let mean = if e.shift > 0.0 {
        (1.0 - lambda) * r + lambda
    } else {
        (1.0 - lambda) * r
    };
    let row = mdp.transition(to);
    let mu = if e.bias > 0.0 { (0.5 * e.bias).min(1.0) } else { 0.0 };
    let target = row[(e.pick % row.len() as u64) as usize].0;
    let kernel = row
        .iter()
        .map(|&(s, p)| (s, (1.0 - mu) * p + if s == target { mu } else { 0.0 }))
        .collect();
    Some((if e.bias > 0.0 { mean } else { r }, kernel))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub pair: PairId,
    pub reward: f64,
    pub next_state: StateId,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObservationSet {
    pub items: Vec<Observation>,
}

impl ObservationSet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Observation> {
        self.items.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{InitialStates, RewardModel, StateActionSpace};

    fn bandit(arms: usize) -> TabularMdp {
        let space = StateActionSpace::full(2, arms).unwrap();
        let n = space.num_pairs();
        TabularMdp::new(
            space,
            1,
            (0..n).map(|x| if x % 2 == 0 { vec![(0, 0.3), (1, 0.7)] } else { vec![(1, 1.0)] }).collect(),
            (0..n)
                .map(|x| RewardModel::Bernoulli { mean: 0.1 * x as f64 })
                .collect(),
            InitialStates::Fixed { state: 0 },
        )
        .unwrap()
    }

    fn own(pair: PairId) -> Observation {
        Observation {
            pair,
            reward: 0.5,
            next_state: 0,
            bias: 0.0,
        }
    }

    #[test]
    fn empty_graph_observes_only_current() {
        let mdp = bandit(2);
        let g = FeedbackGraph::empty(4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let obs = g.observe(&mdp, own(1), &mut rng);
        assert_eq!(obs.items, vec![own(1)]);
    }

    #[test]
    fn deterministic_edge_adds_one_sample() {
        let mdp = bandit(2);
        let g = FeedbackGraph::from_arcs(4, &[(0, 1)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let obs = g.observe(&mdp, own(0), &mut rng);
        assert_eq!(obs.len(), 2);
        assert_eq!(obs.items[1].pair, 1);
        assert_eq!(obs.items[1].bias, 0.0);
    }

    #[test]
    fn stochastic_edge_frequency() {
        let mdp = bandit(2);
        let g = FeedbackGraph::new(4, [EdgeSpec(0, 1, 0.5, 0.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let hits = (0..n).filter(|_| g.observe(&mdp, own(0), &mut rng).len() == 2).count();
        assert!((hits as f64 / n as f64 - 0.5).abs() < 0.02);
    }

    #[test]
    fn construction_errors() {
        assert_eq!(
            FeedbackGraph::from_arcs(3, &[(1, 1)]),
            Err(GraphError::SelfLoop(1))
        );
        assert!(matches!(
            FeedbackGraph::from_arcs(3, &[(0, 3)]),
            Err(GraphError::VertexOutOfRange { .. })
        ));
        assert!(matches!(
            FeedbackGraph::new(3, [EdgeSpec(0, 1, 0.0, 0.0)]),
            Err(GraphError::BadProbability { .. })
        ));
        assert!(matches!(
            FeedbackGraph::new(3, [EdgeSpec(0, 1, 1.0, -0.1)]),
            Err(GraphError::BadBias { .. })
        ));
        assert!(matches!(
            FeedbackGraph::from_arcs(3, &[(0, 1), (0, 1)]),
            Err(GraphError::DuplicateEdge { .. })
        ));
    }

    #[test]
    fn biased_model_respects_bounds() {
        let mdp = bandit(2);
        for seed in 0..50 {
            let g = FeedbackGraph::with_bias_seed(
                4,
                [EdgeSpec(1, 0, 1.0, 0.3), EdgeSpec(3, 2, 1.0, 0.05)],
                seed,
            )
            .unwrap();
            for (from, to, eps) in [(1, 0, 0.3), (3, 2, 0.05)] {
                let (mean, kernel) = biased_model(&g, &mdp, from, to).unwrap();
                assert!((mean - mdp.mean_reward(to)).abs() <= eps + 1e-12);
                let l1: f64 = mdp
                    .transition(to)
                    .iter()
                    .zip(&kernel)
                    .map(|(a, b)| (a.1 - b.1).abs())
                    .sum();
                assert!(l1 <= eps + 1e-12);
            }
        }
    }

    #[test]
    fn biased_samples_match_biased_model() {
        let mdp = bandit(2);
        let g = FeedbackGraph::with_bias_seed(4, [EdgeSpec(1, 0, 1.0, 0.4)], 9).unwrap();
        let (mean, kernel) = biased_model(&g, &mdp, 1, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 40_000;
        let (mut rsum, mut s1) = (0.0, 0usize);
        for _ in 0..n {
            let obs = g.observe(&mdp, own(1), &mut rng);
            let o = obs.items[1];
            assert_eq!(o.bias, 0.4);
            rsum += o.reward;
            s1 += (o.next_state == 1) as usize;
        }
        assert!((rsum / n as f64 - mean).abs() < 0.01);
        let p1 = kernel.iter().find(|e| e.0 == 1).unwrap().1;
        assert!((s1 as f64 / n as f64 - p1).abs() < 0.01);
    }

    #[test]
    fn in_neighborhoods_are_closed() {
        let g = FeedbackGraph::from_arcs(3, &[(0, 1), (2, 1)]).unwrap();
        assert_eq!(g.closed_in_neighborhoods(), vec![vec![0], vec![0, 1, 2], vec![2]]);
    }
}
