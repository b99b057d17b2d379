//! The optimistic learning loop: plan, act for one episode, fold every
//! observation of the feedback graph into the statistics, repeat.

use std::collections::HashMap;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{FeedbackGraph, GraphError, Observation};
use crate::mdp::{
    optimal_values, policy_value, MdpError, PairId, Policy, StateId, Step, TabularMdp,
    Trajectory, ValueTables,
};
use crate::planner::{optimistic_plan, ConfidenceConfig, ModelStats, PlanResult, ValueBounds};

pub const DEFAULT_BUDGET: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("delta must lie in (0, 1], got {0}")]
    BadDelta(f64),
    #[error("a fixed initial state is required")]
    NeedsFixedInitialState,
    #[error("episode budget of {budget} exhausted; best certificate width {best_width}")]
    Budget { budget: usize, best_width: f64 },
    #[error("episode budget of {budget} exhausted in phase one; active tasks {active:?}")]
    PhaseOneBudget { budget: usize, active: Vec<usize> },
    #[error("expected exactly one task with environment rewards, found {0}")]
    UnknownTaskCount(usize),
    #[error("task {task} has {got} reward entries, expected {expected}")]
    TaskRewardLength {
        task: usize,
        expected: usize,
        got: usize,
    },
    #[error("task {task} reward {value} outside [0, 1]")]
    TaskRewardRange { task: usize, value: f64 },
    #[error("dominating set is empty")]
    EmptyDominatingSet,
    #[error("dominating vertex {0} is out of range")]
    DominatingOutOfRange(PairId),
    #[error("set does not dominate the graph; uncovered vertices {uncovered:?}")]
    NotDominating { uncovered: Vec<PairId> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub delta: f64,
    /// Overrides the MDP's true support bound when set.
    pub support_bound: Option<usize>,
    pub value_bounds: ValueBounds,
    /// Drop observations whose bias bound exceeds this threshold.
    pub bias_filter: Option<f64>,
    /// Maximum number of sampled episodes for the PAC-style drivers.
    pub budget: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            delta: 0.1,
            support_bound: None,
            value_bounds: ValueBounds::HorizonDefault,
            bias_filter: None,
            budget: DEFAULT_BUDGET,
        }
    }
}

impl AgentConfig {
    pub fn with_delta(delta: f64) -> Self {
        Self {
            delta,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), AgentError> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(AgentError::BadDelta(self.delta));
        }
        Ok(())
    }
}

/// Model statistics plus the confidence configuration; agnostic to the graph.
#[derive(Debug, Clone)]
pub struct OrlcAgent {
    stats: ModelStats,
    conf: ConfidenceConfig,
    bias_filter: Option<f64>,
    log: Option<Vec<Observation>>,
    received: u64,
}

impl OrlcAgent {
    pub fn new(mdp: &TabularMdp, cfg: &AgentConfig) -> Result<Self, AgentError> {
        cfg.validate()?;
        let conf = ConfidenceConfig::new(
            cfg.delta,
            cfg.support_bound.unwrap_or(mdp.support_bound()),
            mdp.horizon(),
            mdp.num_pairs(),
        )
        .with_value_bounds(cfg.value_bounds.clone());
        Ok(Self {
            stats: ModelStats::for_mdp(mdp),
            conf,
            bias_filter: cfg.bias_filter,
            log: None,
            received: 0,
        })
    }

    /// Keep every recorded observation (for replay checks).
    pub fn with_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn stats(&self) -> &ModelStats {
        &self.stats
    }

    pub fn confidence(&self) -> &ConfidenceConfig {
        &self.conf
    }

    pub fn log(&self) -> Option<&[Observation]> {
        self.log.as_deref()
    }

    /// Observations delivered by the graph, before filtering.
    pub fn received(&self) -> u64 {
        self.received
    }

    pub fn plan(&self) -> PlanResult {
        optimistic_plan(&self.stats, &self.conf)
    }

    fn record(&mut self, o: &Observation) {
        self.received += 1;
        if matches!(self.bias_filter, Some(t) if o.bias > t) {
            return;
        }
        self.stats.record(o);
        if let Some(log) = &mut self.log {
            log.push(*o);
        }
    }

    /// Plays `policy` from `s1` for one episode, updating the statistics
    /// with the full observation set of every step.
    pub fn play_episode<R: Rng + ?Sized>(
        &mut self,
        mdp: &TabularMdp,
        graph: &FeedbackGraph,
        policy: &Policy,
        s1: StateId,
        rng: &mut R,
    ) -> Result<Trajectory, AgentError> {
        if s1 >= mdp.num_states() {
            return Err(MdpError::StateOutOfRange(s1).into());
        }
        let mut steps = Vec::with_capacity(mdp.horizon());
        let mut s = s1;
        for h in 0..mdp.horizon() {
            let x = policy.pair_at(mdp, s, h)?;
            let (reward, next_state) = mdp.sample_transition(x, rng);
            let own = Observation {
                pair: x,
                reward,
                next_state,
                bias: 0.0,
            };
            for o in graph.observe(mdp, own, rng).iter() {
                self.record(o);
            }
            steps.push(Step {
                state: s,
                action: mdp.space().pair(x).1,
                pair: x,
                reward,
                next_state,
            });
            s = next_state;
        }
        Ok(Trajectory { episode: 0, steps })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub cert_lo: f64,
    pub cert_hi: f64,
    pub v_pi: f64,
    pub v_star: f64,
    pub regret_cum: f64,
    pub return_realized: f64,
}

/// What an observer sees after each episode.
pub struct EpisodeView<'a> {
    pub episode: usize,
    pub s1: StateId,
    pub plan: &'a PlanResult,
    pub trajectory: &'a Trajectory,
}

/// Exact `V^π_1` with a memo keyed by the policy table.
pub struct PolicyEvaluator<'a> {
    mdp: &'a TabularMdp,
    cache: HashMap<Policy, ValueTables>,
}

impl<'a> PolicyEvaluator<'a> {
    const MAX_ENTRIES: usize = 4096;

    pub fn new(mdp: &'a TabularMdp) -> Self {
        Self {
            mdp,
            cache: HashMap::new(),
        }
    }

    pub fn tables(&mut self, policy: &Policy) -> Result<&ValueTables, MdpError> {
        if !self.cache.contains_key(policy) {
            if self.cache.len() >= Self::MAX_ENTRIES {
                self.cache.clear();
            }
            let t = policy_value(self.mdp, policy)?;
            self.cache.insert(policy.clone(), t);
        }
        Ok(&self.cache[policy])
    }

    pub fn value(&mut self, policy: &Policy, s: StateId) -> Result<f64, MdpError> {
        Ok(self.tables(policy)?.v(0, s))
    }
}

/// Runs `episodes` episodes and reports per-episode certificates and exact regret.
pub fn run<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    graph: &FeedbackGraph,
    cfg: &AgentConfig,
    episodes: usize,
    rng: &mut R,
) -> Result<Vec<EpisodeRecord>, AgentError> {
    run_with_observer(mdp, graph, cfg, episodes, rng, |_| {})
}

pub fn run_with_observer<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    graph: &FeedbackGraph,
    cfg: &AgentConfig,
    episodes: usize,
    rng: &mut R,
    mut observer: impl FnMut(&EpisodeView),
) -> Result<Vec<EpisodeRecord>, AgentError> {
    graph.check_compatible(mdp)?;
    let mut agent = OrlcAgent::new(mdp, cfg)?;
    let (v_star, _) = optimal_values(mdp);
    let mut eval = PolicyEvaluator::new(mdp);
    let mut records = Vec::with_capacity(episodes);
    let mut regret = 0.0;
    for k in 1..=episodes {
        let plan = agent.plan();
        let s1 = mdp.initial_states().state_for(k - 1, rng);
        let mut traj = agent.play_episode(mdp, graph, &plan.policy, s1, rng)?;
        traj.episode = k;
        let v_pi = eval.value(&plan.policy, s1)?;
        let vs = v_star.v(0, s1);
        regret += (vs - v_pi).max(0.0);
        let (cert_lo, cert_hi) = plan.certificate(s1);
        records.push(EpisodeRecord {
            episode: k,
            cert_lo,
            cert_hi,
            v_pi,
            v_star: vs,
            regret_cum: regret,
            return_realized: traj.total_reward(),
        });
        observer(&EpisodeView {
            episode: k,
            s1,
            plan: &plan,
            trajectory: &traj,
        });
    }
    Ok(records)
}

#[derive(Debug, Clone)]
pub struct CertifiedPolicy {
    pub policy: Policy,
    /// Episodes sampled before the certificate fell below the target.
    pub episodes: usize,
    pub certificate: (f64, f64),
    /// The certifying plan, bounds included.
    pub plan: PlanResult,
}

impl CertifiedPolicy {
    pub fn width(&self) -> f64 {
        self.certificate.1 - self.certificate.0
    }
}

/// Plays until the certificate of the planned policy is at most `epsilon`.
pub fn run_until_certificate<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    graph: &FeedbackGraph,
    cfg: &AgentConfig,
    epsilon: f64,
    rng: &mut R,
) -> Result<CertifiedPolicy, AgentError> {
    run_until_certificate_with_observer(mdp, graph, cfg, epsilon, rng, |_| {})
}

pub fn run_until_certificate_with_observer<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    graph: &FeedbackGraph,
    cfg: &AgentConfig,
    epsilon: f64,
    rng: &mut R,
    mut observer: impl FnMut(&EpisodeView),
) -> Result<CertifiedPolicy, AgentError> {
    graph.check_compatible(mdp)?;
    let s1 = mdp
        .initial_states()
        .fixed_state()
        .ok_or(AgentError::NeedsFixedInitialState)?;
    let mut agent = OrlcAgent::new(mdp, cfg)?;
    let mut best_width = f64::INFINITY;
    let mut sampled = 0;
    loop {
        let plan = agent.plan();
        let width = plan.width(s1);
        best_width = best_width.min(width);
        if width <= epsilon {
            return Ok(CertifiedPolicy {
                certificate: plan.certificate(s1),
                policy: plan.policy.clone(),
                episodes: sampled,
                plan,
            });
        }
        if sampled >= cfg.budget {
            return Err(AgentError::Budget {
                budget: cfg.budget,
                best_width,
            });
        }
        let mut traj = agent.play_episode(mdp, graph, &plan.policy, s1, rng)?;
        sampled += 1;
        traj.episode = sampled;
        observer(&EpisodeView {
            episode: sampled,
            s1,
            plan: &plan,
            trajectory: &traj,
        });
    }
}

/// A random deterministic policy: each `(s, h)` picks an admissible action
/// uniformly and independently.
pub fn random_policy<R: Rng + ?Sized>(mdp: &TabularMdp, rng: &mut R) -> Policy {
    let space = mdp.space();
    Policy::from_fn(mdp.horizon(), mdp.num_states(), |s, _| {
        let xs = space.actions_at(s);
        Some(space.pair(xs[rng.gen_range(0..xs.len())]).1)
    })
}

/// Calibration baseline: a fresh random deterministic policy every episode,
/// with the trivial certificate `[0, H]`.
pub fn run_uniform_baseline<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    episodes: usize,
    rng: &mut R,
) -> Result<Vec<EpisodeRecord>, AgentError> {
    let (v_star, _) = optimal_values(mdp);
    let mut records = Vec::with_capacity(episodes);
    let mut regret = 0.0;
    for k in 1..=episodes {
        let s1 = mdp.initial_states().state_for(k - 1, rng);
        let policy = random_policy(mdp, rng);
        let v_pi = policy_value(mdp, &policy)?.v(0, s1);
        let traj = crate::mdp::sample_episode(mdp, &policy, s1, rng)?;
        let vs = v_star.v(0, s1);
        regret += (vs - v_pi).max(0.0);
        records.push(EpisodeRecord {
            episode: k,
            cert_lo: 0.0,
            cert_hi: mdp.horizon() as f64,
            v_pi,
            v_star: vs,
            regret_cum: regret,
            return_realized: traj.total_reward(),
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{InitialStates, RewardModel, StateActionSpace};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_arm(h: usize) -> TabularMdp {
        TabularMdp::new(
            StateActionSpace::full(1, 2).unwrap(),
            h,
            vec![vec![(0, 1.0)]; 2],
            vec![
                RewardModel::Bernoulli { mean: 0.3 },
                RewardModel::Bernoulli { mean: 0.7 },
            ],
            InitialStates::Fixed { state: 0 },
        )
        .unwrap()
    }

    #[test]
    fn empty_graph_leaves_unplayed_pairs_unseen() {
        let mdp = two_arm(1);
        let mut agent = OrlcAgent::new(&mdp, &AgentConfig::default()).unwrap();
        let policy = Policy::from_fn(1, 1, |_, _| Some(1));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        agent
            .play_episode(&mdp, &FeedbackGraph::empty(2), &policy, 0, &mut rng)
            .unwrap();
        assert_eq!(agent.stats().count(0), 0);
        assert_eq!(agent.stats().count(1), 1);
    }

    #[test]
    fn complete_graph_sees_everything() {
        let mdp = two_arm(3);
        let mut agent = OrlcAgent::new(&mdp, &AgentConfig::default()).unwrap();
        let plan = agent.plan();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        agent
            .play_episode(&mdp, &FeedbackGraph::complete(2), &plan.policy, 0, &mut rng)
            .unwrap();
        assert!((0..2).all(|x| agent.stats().count(x) >= 3));
    }

    #[test]
    fn bias_filter_drops_observations() {
        let mdp = two_arm(1);
        let graph = FeedbackGraph::new(2, [crate::graph::EdgeSpec(1, 0, 1.0, 0.5)]).unwrap();
        let cfg = AgentConfig {
            bias_filter: Some(0.1),
            ..AgentConfig::default()
        };
        let mut agent = OrlcAgent::new(&mdp, &cfg).unwrap();
        let policy = Policy::from_fn(1, 1, |_, _| Some(1));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        agent.play_episode(&mdp, &graph, &policy, 0, &mut rng).unwrap();
        assert_eq!(agent.received(), 2);
        assert_eq!(agent.stats().total_count(), 1);
    }

    #[test]
    fn wide_epsilon_stops_immediately() {
        let mdp = two_arm(3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = run_until_certificate(&mdp, &FeedbackGraph::empty(2), &AgentConfig::default(), 3.0, &mut rng)
            .unwrap();
        assert_eq!(out.episodes, 0);
    }

    #[test]
    fn budget_error_reports_best_width() {
        let mdp = two_arm(2);
        let cfg = AgentConfig {
            budget: 3,
            ..AgentConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = run_until_certificate(&mdp, &FeedbackGraph::empty(2), &cfg, 0.01, &mut rng).unwrap_err();
        assert!(matches!(err, AgentError::Budget { budget: 3, best_width } if best_width <= 2.0));
    }

    #[test]
    fn mismatched_graph_is_rejected() {
        let mdp = two_arm(1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = run(&mdp, &FeedbackGraph::empty(3), &AgentConfig::default(), 1, &mut rng).unwrap_err();
        assert!(matches!(err, AgentError::Graph(GraphError::SizeMismatch { .. })));
    }

    #[test]
    fn non_fixed_start_rejected_for_pac_driver() {
        let mdp = two_arm(1)
            .with_initial_states(InitialStates::RoundRobin { states: vec![0] })
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = run_until_certificate(&mdp, &FeedbackGraph::empty(2), &AgentConfig::default(), 0.5, &mut rng)
            .unwrap_err();
        assert_eq!(err, AgentError::NeedsFixedInitialState);
    }
}
