//! Two-phase learning with a known dominating set.
//!
//! Phase one learns, for every dominating pair `X_i`, a policy that reaches
//! it, by running the optimistic agent on a task-extended MDP whose task `i`
//! pays 1 exactly at `X_i`. Phase two plays those reach-policies in circular
//! order, which spreads observations over the whole graph, until the main
//! task's certificate is narrow enough.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, AgentError, OrlcAgent, DEFAULT_BUDGET};
use crate::graph::FeedbackGraph;
use crate::mdp::{PairId, Policy, StateId, TabularMdp, Trajectory};
use crate::multitask::{build_multitask_extension, MultiTaskExtension, TaskReward, TaskSpec};
use crate::planner::{PlanResult, ValueBounds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ValueBoundMode {
    /// `H − h + 1` for every task.
    #[default]
    General,
    /// Reach tasks bounded by 1: sound when each dominating pair can be
    /// visited at most once per episode.
    Sparse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomSetConfig {
    pub dominating: Vec<PairId>,
    pub epsilon: f64,
    pub delta: f64,
    pub mode: ValueBoundMode,
    pub budget: usize,
    /// Vertices that must be dominated; `None` means all of them.
    pub coverage: Option<Vec<PairId>>,
    pub support_bound: Option<usize>,
}

impl DomSetConfig {
    pub fn new(dominating: Vec<PairId>, epsilon: f64, delta: f64) -> Self {
        Self {
            dominating,
            epsilon,
            delta,
            mode: ValueBoundMode::General,
            budget: DEFAULT_BUDGET,
            coverage: None,
            support_bound: None,
        }
    }
}

/// Checks that every vertex of `scope` (default: all) is in `dominating` or
/// receives an edge from it.
pub fn verify_domination(
    graph: &FeedbackGraph,
    dominating: &[PairId],
    scope: Option<&[PairId]>,
) -> Result<(), AgentError> {
    if dominating.is_empty() {
        return Err(AgentError::EmptyDominatingSet);
    }
    let n = graph.num_vertices();
    let mut covered = vec![false; n];
    for &d in dominating {
        if d >= n {
            return Err(AgentError::DominatingOutOfRange(d));
        }
        covered[d] = true;
        for e in graph.out_edges(d) {
            covered[e.target] = true;
        }
    }
    let all: Vec<PairId>;
    let scope = match scope {
        Some(s) => s,
        None => {
            all = (0..n).collect();
            &all
        }
    };
    let uncovered: Vec<PairId> = scope.iter().copied().filter(|&x| x >= n || !covered[x]).collect();
    if uncovered.is_empty() {
        Ok(())
    } else {
        Err(AgentError::NotDominating { uncovered })
    }
}

/// Task 0 carries the environment's rewards, task `i ≥ 1` pays 1 at `X_i`.
#[derive(Debug, Clone)]
pub struct DomSetExtension {
    pub tasks: MultiTaskExtension,
    pub dominating: Vec<PairId>,
    pub value_bounds: ValueBounds,
}

impl DomSetExtension {
    pub fn gamma(&self) -> usize {
        self.dominating.len()
    }

    /// Extended policy that follows the base policy in every task copy.
    pub fn lift_policy(&self, base: &Policy) -> Policy {
        let ns = self.tasks.base_states();
        Policy::from_fn(base.horizon(), self.tasks.mdp.num_states(), |s, h| base.get(s % ns, h))
    }
}

pub fn build_domset_extension(
    mdp: &TabularMdp,
    graph: &FeedbackGraph,
    cfg: &DomSetConfig,
) -> Result<DomSetExtension, AgentError> {
    graph.check_compatible(mdp)?;
    verify_domination(graph, &cfg.dominating, cfg.coverage.as_deref())?;
    let nx = mdp.num_pairs();
    let mut tasks = vec![TaskReward::Environment];
    for &d in &cfg.dominating {
        let mut rewards = vec![0.0; nx];
        rewards[d] = 1.0;
        tasks.push(TaskReward::Known { rewards });
    }
    let ext = build_multitask_extension(mdp, graph, &TaskSpec::new(tasks))?;
    let value_bounds = match cfg.mode {
        ValueBoundMode::General => ValueBounds::HorizonDefault,
        ValueBoundMode::Sparse => {
            let (big_h, ext_x) = (mdp.horizon(), ext.mdp.num_pairs());
            let mut table = Vec::with_capacity(big_h * ext_x);
            for h in 0..big_h {
                for x in 0..ext_x {
                    let task = x / nx;
                    table.push(if task == 0 { (big_h - h) as f64 } else { 1.0 });
                }
            }
            ValueBounds::Table {
                q_max: table.clone(),
                v_max: table,
            }
        }
    };
    Ok(DomSetExtension {
        tasks: ext,
        dominating: cfg.dominating.clone(),
        value_bounds,
    })
}

/// Per-episode report for tracing.
pub struct DomSetEvent<'a> {
    pub episode: usize,
    pub phase: u8,
    /// Active reach tasks after this episode's retirements (0 in phase two).
    pub active_tasks: usize,
    /// Reach task sampled (phase one) or reach policy played (phase two), 1-based.
    pub task_played: usize,
    /// Extended start state of the episode.
    pub start: StateId,
    /// Plan whose certificate is reported for this episode.
    pub plan: &'a PlanResult,
    /// Extended policy actually played.
    pub played: &'a Policy,
    pub trajectory: &'a Trajectory,
}

#[derive(Debug, Clone)]
pub struct PhaseOneOutcome {
    /// Reach policy of `X_i` on base states, index `i − 1`.
    pub policies: Vec<Policy>,
    pub reach_estimates: Vec<f64>,
    pub episodes: usize,
    /// Last sampled task, 1-based.
    pub last_task: usize,
    /// The last plan of the phase; phase two's loop test starts from it.
    pub last_plan: PlanResult,
    pub retirement_order: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct PhaseTwoOutcome {
    pub policy: Policy,
    pub episodes: usize,
    /// Episodes played per reach policy, index `i − 1`.
    pub plays: Vec<usize>,
    /// Order in which reach policies were played, 1-based.
    pub rotation: Vec<usize>,
    pub certificate: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct DomSetOutcome {
    pub policy: Policy,
    pub phase_one: PhaseOneOutcome,
    pub phase_two: PhaseTwoOutcome,
}

impl DomSetOutcome {
    pub fn total_episodes(&self) -> usize {
        self.phase_one.episodes + self.phase_two.episodes
    }
}

/// Shared agent state across both phases.
pub struct DomSetSession<'a> {
    ext: &'a DomSetExtension,
    cfg: &'a DomSetConfig,
    agent: OrlcAgent,
    s1: StateId,
    sampled: usize,
}

impl<'a> DomSetSession<'a> {
    pub fn new(
        base: &TabularMdp,
        ext: &'a DomSetExtension,
        cfg: &'a DomSetConfig,
    ) -> Result<Self, AgentError> {
        let s1 = base
            .initial_states()
            .fixed_state()
            .ok_or(AgentError::NeedsFixedInitialState)?;
        let agent_cfg = AgentConfig {
            delta: cfg.delta / 2.0,
            support_bound: cfg.support_bound,
            value_bounds: ext.value_bounds.clone(),
            bias_filter: None,
            budget: cfg.budget,
        };
        Ok(Self {
            agent: OrlcAgent::new(&ext.tasks.mdp, &agent_cfg)?,
            ext,
            cfg,
            s1,
            sampled: 0,
        })
    }

    pub fn agent(&self) -> &OrlcAgent {
        &self.agent
    }

    fn play<R: Rng + ?Sized>(
        &mut self,
        policy: &Policy,
        start: StateId,
        rng: &mut R,
    ) -> Result<Trajectory, AgentError> {
        let t = &self.ext.tasks;
        let mut traj = self.agent.play_episode(&t.mdp, &t.graph, policy, start, rng)?;
        self.sampled += 1;
        traj.episode = self.sampled;
        Ok(traj)
    }

    pub fn phase_one<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        mut observer: impl FnMut(&DomSetEvent),
    ) -> Result<PhaseOneOutcome, AgentError> {
        let ext = self.ext;
        let gamma = ext.gamma();
        let mut active: Vec<usize> = (1..=gamma).collect();
        let mut policies = vec![None; gamma];
        let mut estimates = vec![0.0; gamma];
        let mut order = Vec::new();
        let start_count = self.sampled;
        loop {
            let plan = self.agent.plan();
            let s1 = self.s1;
            let start = |i: usize| ext.tasks.state(s1, i);
            let mut j = active[0];
            for &i in &active {
                if plan.width(start(i)) > plan.width(start(j)) {
                    j = i;
                }
            }
            active.retain(|&i| {
                let (lo, hi) = plan.certificate(start(i));
                if hi <= 2.0 * lo {
                    policies[i - 1] = Some(ext.tasks.restrict_policy(&plan.policy, i));
                    estimates[i - 1] = lo;
                    order.push(i);
                    false
                } else {
                    true
                }
            });
            if self.sampled >= self.cfg.budget {
                return Err(AgentError::PhaseOneBudget {
                    budget: self.cfg.budget,
                    active,
                });
            }
            let traj = self.play(&plan.policy, start(j), rng)?;
            observer(&DomSetEvent {
                episode: self.sampled,
                phase: 1,
                active_tasks: active.len(),
                task_played: j,
                start: start(j),
                plan: &plan,
                played: &plan.policy,
                trajectory: &traj,
            });
            if active.is_empty() {
                return Ok(PhaseOneOutcome {
                    policies: policies.into_iter().map(|p| p.expect("retired")).collect(),
                    reach_estimates: estimates,
                    episodes: self.sampled - start_count,
                    last_task: j,
                    last_plan: plan,
                    retirement_order: order,
                });
            }
        }
    }

    pub fn phase_two<R: Rng + ?Sized>(
        &mut self,
        first: &PhaseOneOutcome,
        rng: &mut R,
        mut observer: impl FnMut(&DomSetEvent),
    ) -> Result<PhaseTwoOutcome, AgentError> {
        let ext = self.ext;
        let gamma = ext.gamma();
        let lifted: Vec<Policy> = first.policies.iter().map(|p| ext.lift_policy(p)).collect();
        let start = ext.tasks.state(self.s1, 0);
        let mut plan = first.last_plan.clone();
        let mut j = first.last_task;
        let mut plays = vec![0; gamma];
        let mut rotation = Vec::new();
        let start_count = self.sampled;
        let mut best_width = f64::INFINITY;
        loop {
            let width = plan.width(start);
            best_width = best_width.min(width);
            if width <= self.cfg.epsilon {
                break;
            }
            if self.sampled >= self.cfg.budget {
                return Err(AgentError::Budget {
                    budget: self.cfg.budget,
                    best_width,
                });
            }
            j = j % gamma + 1;
            let traj = self.play(&lifted[j - 1], start, rng)?;
            plays[j - 1] += 1;
            rotation.push(j);
            observer(&DomSetEvent {
                episode: self.sampled,
                phase: 2,
                active_tasks: 0,
                task_played: j,
                start,
                plan: &plan,
                played: &lifted[j - 1],
                trajectory: &traj,
            });
            plan = self.agent.plan();
        }
        Ok(PhaseTwoOutcome {
            policy: ext.tasks.restrict_policy(&plan.policy, 0),
            episodes: self.sampled - start_count,
            plays,
            rotation,
            certificate: plan.certificate(start),
        })
    }
}

pub fn run_domset<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    graph: &FeedbackGraph,
    cfg: &DomSetConfig,
    rng: &mut R,
) -> Result<DomSetOutcome, AgentError> {
    run_domset_with_observer(mdp, graph, cfg, rng, |_| {})
}

pub fn run_domset_with_observer<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    graph: &FeedbackGraph,
    cfg: &DomSetConfig,
    rng: &mut R,
    mut observer: impl FnMut(&DomSetEvent),
) -> Result<DomSetOutcome, AgentError> {
    let ext = build_domset_extension(mdp, graph, cfg)?;
    let mut session = DomSetSession::new(mdp, &ext, cfg)?;
    let phase_one = session.phase_one(rng, &mut observer)?;
    let phase_two = session.phase_two(&phase_one, rng, &mut observer)?;
    Ok(DomSetOutcome {
        policy: phase_two.policy.clone(),
        phase_one,
        phase_two,
    })
}
