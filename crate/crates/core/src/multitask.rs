//! Multi-task learning on the extended MDP: `m` disjoint copies of an MDP
//! sharing dynamics, one per reward function, coupled through the graph.
//!
//! Extended state `(s, i)` has index `i·S + s`, extended pair `(x, i)` has
//! index `i·|X| + x`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, AgentError, EpisodeView, OrlcAgent};
use crate::graph::{EdgeSpec, FeedbackGraph};
use crate::mdp::{
    InitialStates, PairId, Policy, RewardModel, StateActionSpace, StateId, TabularMdp,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskReward {
    /// Rewards come from the environment (the MDP's own reward models).
    Environment,
    /// Known mean reward per base pair, observed without noise.
    Known { rewards: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub tasks: Vec<TaskReward>,
}

impl TaskSpec {
    pub fn new(tasks: Vec<TaskReward>) -> Self {
        Self { tasks }
    }

    pub fn count(&self) -> usize {
        self.tasks.len()
    }

    fn validate(&self, num_pairs: usize) -> Result<(), AgentError> {
        let unknown = self
            .tasks
            .iter()
            .filter(|t| matches!(t, TaskReward::Environment))
            .count();
        if unknown != 1 {
            return Err(AgentError::UnknownTaskCount(unknown));
        }
        for (task, t) in self.tasks.iter().enumerate() {
            if let TaskReward::Known { rewards } = t {
                if rewards.len() != num_pairs {
                    return Err(AgentError::TaskRewardLength {
                        task,
                        expected: num_pairs,
                        got: rewards.len(),
                    });
                }
                if let Some(&value) = rewards.iter().find(|r| !(0.0..=1.0).contains(*r)) {
                    return Err(AgentError::TaskRewardRange { task, value });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MultiTaskExtension {
    pub mdp: TabularMdp,
    pub graph: FeedbackGraph,
    num_tasks: usize,
    base_states: usize,
    base_pairs: usize,
}

impl MultiTaskExtension {
    pub fn num_tasks(&self) -> usize {
        self.num_tasks
    }

    pub fn base_states(&self) -> usize {
        self.base_states
    }

    pub fn base_pairs(&self) -> usize {
        self.base_pairs
    }

    pub fn state(&self, s: StateId, task: usize) -> StateId {
        task * self.base_states + s
    }

    pub fn pair(&self, x: PairId, task: usize) -> PairId {
        task * self.base_pairs + x
    }

    /// `(base pair, task)` of an extended pair.
    pub fn split_pair(&self, x: PairId) -> (PairId, usize) {
        (x % self.base_pairs, x / self.base_pairs)
    }

    /// Restriction of an extended policy to the copy of `task`.
    pub fn restrict_policy(&self, policy: &Policy, task: usize) -> Policy {
        Policy::from_fn(policy.horizon(), self.base_states, |s, h| {
            policy.get(self.state(s, task), h)
        })
    }
}

/// Builds the extended MDP and graph. Base edges `x -> y` become
/// `(x, i) -> (y, j)` for all task pairs, and all copies of the same pair are
/// mutually connected so that they form a clique.
pub fn build_multitask_extension(
    mdp: &TabularMdp,
    graph: &FeedbackGraph,
    tasks: &TaskSpec,
) -> Result<MultiTaskExtension, AgentError> {
    graph.check_compatible(mdp)?;
    let base_pairs = mdp.num_pairs();
    tasks.validate(base_pairs)?;
    let (ns, m) = (mdp.num_states(), tasks.count());
    let space = mdp.space();

    let mut pairs = Vec::with_capacity(m * base_pairs);
    let mut transitions = Vec::with_capacity(m * base_pairs);
    let mut rewards = Vec::with_capacity(m * base_pairs);
    for (i, task) in tasks.tasks.iter().enumerate() {
        for x in 0..base_pairs {
            let (s, a) = space.pair(x);
            pairs.push((i * ns + s, a));
            transitions.push(
                mdp.transition(x)
                    .iter()
                    .map(|&(s2, p)| (i * ns + s2, p))
                    .collect(),
            );
            rewards.push(match task {
                TaskReward::Environment => *mdp.reward_model(x),
                TaskReward::Known { rewards } => RewardModel::Deterministic { value: rewards[x] },
            });
        }
    }
    let ext_space = StateActionSpace::new(m * ns, space.num_actions(), pairs)?;
    let initial = match mdp.initial_states() {
        InitialStates::Categorical { weights } => {
            let mut w = weights.clone();
            w.resize(m * ns, 0.0);
            InitialStates::Categorical { weights: w }
        }
        other => other.clone(),
    };
    let ext_mdp = TabularMdp::new(ext_space, mdp.horizon(), transitions, rewards, initial)?;

    let mut edges = Vec::new();
    for EdgeSpec(from, to, q, bias) in graph.edge_specs() {
        for i in 0..m {
            for j in 0..m {
                edges.push(EdgeSpec(i * base_pairs + from, j * base_pairs + to, q, bias));
            }
        }
    }
    for x in 0..base_pairs {
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    edges.push(EdgeSpec::plain(i * base_pairs + x, j * base_pairs + x));
                }
            }
        }
    }
    let ext_graph = FeedbackGraph::with_bias_seed(m * base_pairs, edges, graph.bias_seed())?;
    Ok(MultiTaskExtension {
        mdp: ext_mdp,
        graph: ext_graph,
        num_tasks: m,
        base_states: ns,
        base_pairs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiTaskOutcome {
    pub policies: Vec<Policy>,
    pub episodes: usize,
    /// Final certificate width of every task.
    pub widths: Vec<f64>,
}

pub fn run_multitask<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    graph: &FeedbackGraph,
    tasks: &TaskSpec,
    cfg: &AgentConfig,
    epsilon: f64,
    rng: &mut R,
) -> Result<MultiTaskOutcome, AgentError> {
    run_multitask_with_observer(mdp, graph, tasks, cfg, epsilon, rng, |_| {})
}

/// Each episode starts in the task copy with the widest certificate; stops
/// once that width (hence every task's) is at most `epsilon`.
pub fn run_multitask_with_observer<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    graph: &FeedbackGraph,
    tasks: &TaskSpec,
    cfg: &AgentConfig,
    epsilon: f64,
    rng: &mut R,
    mut observer: impl FnMut(&EpisodeView),
) -> Result<MultiTaskOutcome, AgentError> {
    let s1 = mdp
        .initial_states()
        .fixed_state()
        .ok_or(AgentError::NeedsFixedInitialState)?;
    let ext = build_multitask_extension(mdp, graph, tasks)?;
    let mut agent = OrlcAgent::new(&ext.mdp, cfg)?;
    let mut best_width = f64::INFINITY;
    let mut sampled = 0;
    loop {
        let plan = agent.plan();
        let widths: Vec<f64> = (0..ext.num_tasks())
            .map(|i| plan.width(ext.state(s1, i)))
            .collect();
        let task = argmax_first(&widths);
        best_width = best_width.min(widths[task]);
        if widths[task] <= epsilon {
            return Ok(MultiTaskOutcome {
                policies: (0..ext.num_tasks())
                    .map(|i| ext.restrict_policy(&plan.policy, i))
                    .collect(),
                episodes: sampled,
                widths,
            });
        }
        if sampled >= cfg.budget {
            return Err(AgentError::Budget {
                budget: cfg.budget,
                best_width,
            });
        }
        let start = ext.state(s1, task);
        let mut traj = agent.play_episode(&ext.mdp, &ext.graph, &plan.policy, start, rng)?;
        sampled += 1;
        traj.episode = sampled;
        observer(&EpisodeView {
            episode: sampled,
            s1: start,
            plan: &plan,
            trajectory: &traj,
        });
    }
}

/// Index of the first maximum.
pub(crate) fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
